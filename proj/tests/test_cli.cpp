#include <cstdlib>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rosprompt/cli.hpp"
#include "rosprompt/synthetic.hpp"
#include "test_support.hpp"

using namespace rosprompt;
using ojson = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rosprompt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string error_code(const Result& r) {
  const auto last = r.err.substr(r.err.rfind('{'));
  return nlohmann::json::parse(last).at("error").get<std::string>();
}

// Leaf keys of a config object in dotted form.
void leaves(const ojson& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) leaves(value, name, out);
    else out.push_back(name);
  }
}

struct ToyFiles {
  testing::TempDir dir;
  std::string config;
  ToyFiles() {
    write_synthetic_task(make_synthetic_task({}, 7), dir.path());
    config = (dir / "config.json").string();
  }
  std::string out(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors") {
  const auto none = run_cli({});
  CHECK(none.code == cli::kExitValidation);
  const auto unknown = run_cli({"frobnicate"});
  CHECK(unknown.code == cli::kExitValidation);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(error_code(unknown) == "USAGE_ERROR");
}

TEST_CASE("help lists every flag") {
  const auto top = run_cli({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"train", "classify", "eval", "gzsl", "ablate", "sweep-k",
                          "validate-verbalizer"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
  const auto eval = run_cli({"eval", "--help"});
  for (const char* flag : {"--config", "--set", "--seed", "--out", "--verbose", "--prompt",
                           "--protocol"}) {
    CHECK(eval.out.find(flag) != std::string::npos);
  }
  const auto validate = run_cli({"validate-verbalizer", "--help"});
  CHECK(validate.out.find("--lenient") != std::string::npos);
  CHECK(validate.out.find("--verbalizer") != std::string::npos);
}

TEST_CASE("config keys and overrides are one-to-one") {
  for (auto kind : {BackendKind::EncoderOnly, BackendKind::DecoderOnly,
                    BackendKind::EncoderDecoder}) {
    const auto defaults =
        cli::bundled_defaults(kind, defaults::Dataset::SIB200, defaults::Method::RoSPrompt);
    std::vector<std::string> keys;
    leaves(defaults, "", keys);
    CHECK(keys.size() > 30);
    for (const auto& key : keys) {
      auto copy = defaults;
      const auto& current = copy.at(ojson::json_pointer("/" + [&] {
        std::string p = key;
        std::replace(p.begin(), p.end(), '.', '/');
        return p;
      }()));
      CHECK_NOTHROW(cli::apply_override(copy, key + "=" + current.dump()));
    }
  }
  auto c = cli::bundled_defaults(BackendKind::DecoderOnly, defaults::Dataset::SIB200,
                                 defaults::Method::RoSPrompt);
  CHECK_THROWS_AS(cli::apply_override(c, "train.nonsense=1"), Error);
  CHECK_THROWS_AS(cli::apply_override(c, "novalue"), Error);
  cli::apply_override(c, "train.alpha=3.5");
  CHECK(c["train"]["alpha"] == 3.5);
  cli::apply_override(c, "train.init_text=hello world");
  CHECK(c["train"]["init_text"] == "hello world");
  cli::apply_override(c, "languages=[\"en\",\"de\"]");
  CHECK(c["languages"].size() == 2);
}

TEST_CASE("config precedence and backend-keyed defaults") {
  const ojson file = {{"backend", {{"kind", "encoder-decoder"}}}, {"train", {{"alpha", 5}}}};
  const auto c = cli::resolve_config(file, {"train.alpha=7"});
  CHECK(c["train"]["alpha"] == 7);
  CHECK(c["train"]["learning_rate"] == 0.3);
  CHECK(c["train"]["epsilon"] == 0.8);
  CHECK(c["inference"]["k"] == 14);
  const auto mtop = cli::resolve_config(ojson::object(), {"dataset=mtop", "method=spt"});
  CHECK(mtop["inference"]["k"] == 100);
  CHECK_THROWS_AS(cli::resolve_config(ojson{{"bogus", 1}}, {}), Error);
}

TEST_CASE("train, classify and eval") {
  ToyFiles toy;
  const auto out = toy.out("run1");
  const auto trained = run_cli({"train", "-c", toy.config, "--seed", "7", "-o", out});
  REQUIRE(trained.code == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "prompt.bin"));
  const auto log = testing::slurp(std::filesystem::path(out) / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 30);
  const auto resolved =
      nlohmann::json::parse(testing::slurp(std::filesystem::path(out) / "resolved_config.json"));
  CHECK(resolved["seed"] == 7);

  const auto prompt = out + "/prompt.bin";
  const auto cls = run_cli({"classify", "-c", toy.config, "--prompt", prompt, "--input",
                            toy.out("test.jsonl"), "-o", out});
  REQUIRE(cls.code == 0);
  const auto preds = testing::slurp(std::filesystem::path(out) / "predictions.jsonl");
  const auto first = nlohmann::json::parse(preds.substr(0, preds.find('\n')));
  CHECK(first.contains("id"));
  CHECK(first.contains("predicted_class"));
  CHECK(first["scores"].size() == 3);

  const auto ev = run_cli({"eval", "-c", toy.config, "--prompt", prompt, "-o", out});
  REQUIRE(ev.code == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "report.json"));
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "report.csv"));
  CHECK(ev.out.find("toy") != std::string::npos);
}

TEST_CASE("eval error codes") {
  ToyFiles toy;
  const auto missing = run_cli({"eval", "-c", toy.config, "--prompt", toy.out("nope.bin"), "-o",
                                toy.out("o")});
  CHECK(missing.code == cli::kExitValidation);
  CHECK(error_code(missing) == "PROMPT_NOT_FOUND");
  const auto unset = run_cli({"eval", "-c", toy.config, "-o", toy.out("o")});
  CHECK(unset.code == cli::kExitValidation);
  CHECK(error_code(unset) == "PROMPT_NOT_FOUND");

  const auto no_config = run_cli({"train", "-c", toy.out("absent.json"), "-o", toy.out("o")});
  CHECK(no_config.code == cli::kExitValidation);
  const auto bad_key = run_cli({"train", "-c", toy.config, "--set", "train.bogus=1"});
  CHECK(bad_key.code == cli::kExitValidation);
  CHECK(error_code(bad_key) == "INVALID_CONFIG");
  const auto no_embeddings =
      run_cli({"train", "-c", toy.config, "--set", "backend.embeddings=missing.txt", "-o",
               toy.out("o")});
  CHECK(no_embeddings.code == cli::kExitValidation);
  CHECK(error_code(no_embeddings) == "FILE_NOT_FOUND");
}

TEST_CASE("config directory from the environment") {
  ToyFiles toy;
  ::setenv(cli::kConfigDirEnv, toy.dir.path().c_str(), 1);
  const auto r = run_cli({"validate-verbalizer", "-c", "config.json", "-o", toy.out("o")});
  ::unsetenv(cli::kConfigDirEnv);
  CHECK(r.code == 0);
}

TEST_CASE("validate-verbalizer") {
  ToyFiles toy;
  const auto ok = run_cli({"validate-verbalizer", "-c", toy.config});
  CHECK(ok.code == 0);
  CHECK(nlohmann::json::parse(ok.out)["diagnostics"].empty());

  toy.dir.write("multi.json",
                R"({"sports": {"en": ["sports", "sports politics"]}, "politics": {"en": ["politics"]}})");
  const auto strict =
      run_cli({"validate-verbalizer", "-c", toy.config, "--verbalizer", toy.out("multi.json")});
  CHECK(strict.code == cli::kExitValidation);
  CHECK(nlohmann::json::parse(strict.out)["diagnostics"].size() == 1);
  CHECK(error_code(strict) == "INVALID_LABEL_TOKEN");
  const auto lenient = run_cli({"validate-verbalizer", "-c", toy.config, "--verbalizer",
                                toy.out("multi.json"), "--lenient"});
  CHECK(lenient.code == 0);
  CHECK(nlohmann::json::parse(lenient.out)["diagnostics"].size() == 1);

  toy.dir.write("overlap.json",
                R"({"sports": {"en": ["sports"]}, "politics": {"en": ["sports"]}})");
  const auto overlap =
      run_cli({"validate-verbalizer", "-c", toy.config, "--verbalizer", toy.out("overlap.json")});
  CHECK(overlap.code == cli::kExitValidation);
  CHECK(error_code(overlap) == "AMBIGUOUS_VERBALIZER");
  CHECK(nlohmann::json::parse(overlap.out)["diagnostics"][0]["kind"] == "overlap");
}

TEST_CASE("reruns produce identical artifacts") {
  ToyFiles toy;
  const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> jobs = {
      {{"train", "--seed", "3"}, {"prompt.bin", "train_log.jsonl"}},
      {{"eval", "--protocol", "--set", "seeds=[1,2]"}, {"report.json", "report.csv"}},
      {{"gzsl", "--set", "gzsl.repetitions=2"}, {"gzsl_report.json", "gzsl_report.csv"}},
      {{"ablate", "--set", "seeds=[5]"}, {"ablation_report.json", "ablation_report.csv"}},
      {{"sweep-k", "--set", "sweep.k_candidates=[1,3,5]"}, {"k_sweep.json"}},
  };
  for (const auto& [args, files] : jobs) {
    std::vector<std::string> outputs;
    for (const std::string run : {"a", "b"}) {
      auto full = args;
      full.insert(full.end(), {"-c", toy.config, "-o", toy.out(args[0] + run)});
      const auto r = run_cli(full);
      INFO(args[0], " ", r.err);
      REQUIRE(r.code == 0);
    }
    for (const auto& f : files) {
      INFO(args[0], " ", f);
      const auto a = testing::slurp(toy.dir / (args[0] + "a") / f);
      CHECK_FALSE(a.empty());
      CHECK(a == testing::slurp(toy.dir / (args[0] + "b") / f));
    }
  }
  const auto ablation = nlohmann::json::parse(
      testing::slurp(toy.dir / "ablatea" / "ablation_report.json"));
  CHECK(ablation.size() == 5);
  const auto sweep = nlohmann::json::parse(testing::slurp(toy.dir / "sweep-ka" / "k_sweep.json"));
  CHECK(sweep["scores"].size() == 3);
}
