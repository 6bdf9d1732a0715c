#include "rosprompt/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rosprompt/error.hpp"
#include "rosprompt/eval_harness.hpp"
#include "rosprompt/inference.hpp"
#include "rosprompt/trainer.hpp"

namespace rosprompt::cli {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::InvalidConfig, message);
}

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (parts.back().empty()) config_error("malformed config key '" + std::string(key) + "'");
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

// Recursively overlays `src` onto `dst`; objects merge, everything else is
// replaced. Keys unknown to `dst` are rejected.
void merge_into(ojson& dst, const ojson& src, const std::string& prefix) {
  for (const auto& [key, value] : src.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!dst.contains(key)) config_error("unknown config key '" + path + "'");
    ojson& slot = dst[key];
    if (slot.is_object() && value.is_object()) {
      merge_into(slot, value, path);
    } else {
      slot = value;
    }
  }
}

std::string lookup_string(const ojson& file, const std::vector<std::string>& overrides,
                          const std::string& key, const std::string& fallback) {
  for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) {
    const auto eq = it->find('=');
    if (eq != std::string::npos && it->substr(0, eq) == key) {
      return it->substr(eq + 1);
    }
  }
  const ojson* node = &file;
  for (const auto& part : split_key(key)) {
    if (!node->is_object() || !node->contains(part)) return fallback;
    node = &(*node)[part];
  }
  return node->is_string() ? node->get<std::string>() : fallback;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Context {
  ojson config;
  fs::path base_dir;
  fs::path out_dir;
  bool verbose = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void log(const std::string& msg) const {
    if (verbose) *err << msg << '\n';
  }

  const ojson& at(const std::string& key) const {
    const ojson* node = &config;
    for (const auto& part : split_key(key)) node = &node->at(part);
    return *node;
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      config_error("config key '" + key + "': " + e.what());
    }
  }

  fs::path resolve(const std::string& value) const {
    fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
  }

  // Path-valued key that must be set.
  fs::path path(const std::string& key) const {
    const auto value = get<std::string>(key);
    if (value.empty()) config_error("config key '" + key + "' is required");
    return resolve(value);
  }
};

struct Loaded {
  std::shared_ptr<const EmbeddingTable> table;
  std::unique_ptr<ToyBackend> backend;
};

Loaded load_backend(const Context& ctx) {
  Loaded l;
  const auto emb_path = ctx.path("backend.embeddings");
  if (!fs::exists(emb_path)) {
    throw Error(ErrorCode::FileNotFound, "embedding file not found: " + emb_path.string());
  }
  l.table = std::make_shared<const EmbeddingTable>(load_embeddings(emb_path));
  l.backend = std::make_unique<ToyBackend>(
      l.table, parse_backend_kind(ctx.get<std::string>("backend.kind")),
      ctx.get<std::size_t>("backend.max_length"));
  ctx.log("loaded " + std::to_string(l.table->vocab_size()) + " x " +
          std::to_string(l.table->dim()) + " embeddings from " + emb_path.string());
  return l;
}

LabelStrictness strictness(const Context& ctx) {
  const auto s = ctx.get<std::string>("label_strictness");
  if (s == "strict") return LabelStrictness::Strict;
  if (s == "lenient") return LabelStrictness::Lenient;
  config_error("label_strictness must be 'strict' or 'lenient'");
}

TrainingVerbalizer load_verbalizer(const Context& ctx, const Backend& backend) {
  std::vector<VerbalizerDiagnostic> warnings;
  auto v = load_training_verbalizer(ctx.path("verbalizer"), backend.embeddings(),
                                    backend.tokenizer(), strictness(ctx), &warnings);
  for (const auto& w : warnings) *ctx.err << "warning: " << w.message << " (skipped)\n";
  return v;
}

TrainConfig train_config(const Context& ctx) {
  TrainConfig c;
  c.batch_size = ctx.get<std::size_t>("train.batch_size");
  c.learning_rate = ctx.get<double>("train.learning_rate");
  c.epochs = ctx.get<std::size_t>("train.epochs");
  c.loss.epsilon = ctx.get<double>("train.epsilon");
  c.loss.alpha = ctx.get<double>("train.alpha");
  c.prompt_length = ctx.get<std::size_t>("train.prompt_length");
  c.shots_per_class = ctx.get<std::size_t>("train.shots_per_class");
  c.init_text = ctx.get<std::string>("train.init_text");
  c.max_steps = ctx.get<std::size_t>("train.max_steps");
  c.max_grad_norm = ctx.get<double>("train.max_grad_norm");
  c.optimizer.beta1 = ctx.get<double>("train.optimizer.beta1");
  c.optimizer.beta2 = ctx.get<double>("train.optimizer.beta2");
  c.optimizer.eps = ctx.get<double>("train.optimizer.eps");
  c.optimizer.weight_decay = ctx.get<double>("train.optimizer.weight_decay");
  c.seed = ctx.get<std::uint64_t>("seed");
  c.validate();
  return c;
}

ExperimentConfig experiment_config(const Context& ctx) {
  ExperimentConfig e;
  e.train = train_config(ctx);
  e.train_language = ctx.get<std::string>("train_language");
  e.label_language = ctx.get<std::string>("label_language");
  e.aggregate_on = parse_aggregate_on(ctx.get<std::string>("inference.aggregate_on"));
  e.languages = ctx.get<std::vector<std::string>>("languages");
  return e;
}

ClassLabels inference_labels(const Context& ctx) {
  return load_class_labels(ctx.path("inference.labels"));
}

std::vector<std::string> names_of(const ClassLabels& labels) {
  std::vector<std::string> out;
  for (const auto& [name, word] : labels) out.push_back(name);
  return out;
}

std::vector<EvalSet> eval_sets(const Context& ctx) {
  const auto& list = ctx.at("eval");
  if (!list.is_array() || list.empty()) config_error("config key 'eval' needs at least one set");
  const auto default_k = ctx.get<std::size_t>("inference.k");
  std::vector<EvalSet> sets;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& item = list[i];
    if (!item.is_object() || !item.contains("corpus")) {
      config_error("eval[" + std::to_string(i) + "] needs a \"corpus\" path");
    }
    for (const auto& [key, value] : item.items()) {
      if (key != "name" && key != "corpus" && key != "labels" && key != "k") {
        config_error("unknown config key 'eval[" + std::to_string(i) + "]." + key + "'");
      }
    }
    EvalSet set;
    set.name = item.value("name", "eval" + std::to_string(i));
    set.class_labels = item.contains("labels")
                           ? load_class_labels(ctx.resolve(item["labels"].get<std::string>()))
                           : inference_labels(ctx);
    set.k = item.value("k", default_k);
    set.corpus = load_corpus(ctx.resolve(item["corpus"].get<std::string>()),
                             CorpusFormat::Auto, names_of(set.class_labels));
    sets.push_back(std::move(set));
  }
  return sets;
}

SoftPrompt require_prompt(const Context& ctx, const Backend& backend) {
  const auto value = ctx.get<std::string>("prompt");
  if (value.empty()) {
    throw Error(ErrorCode::PromptNotFound, "no prompt checkpoint configured (use --prompt)");
  }
  return load_prompt(ctx.resolve(value), backend);
}

void write_report_files(const Context& ctx, const std::string& stem,
                        std::span<const RunReport> reports) {
  if (reports.size() == 1) {
    write_text_file(ctx.out_dir / (stem + ".json"), report_json(reports.front()));
  } else {
    ojson arr = ojson::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    write_text_file(ctx.out_dir / (stem + ".json"), arr.dump(2) + "\n");
  }
  write_text_file(ctx.out_dir / (stem + ".csv"), report_csv(reports));
}

void print_summary(std::ostream& out, std::span<const RunReport> reports) {
  out << std::left << std::setw(32) << "variant" << std::setw(16) << "set"
      << std::setw(12) << "accuracy" << "macro_f1\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    for (const auto& [name, m] : r.mean) {
      out << std::setw(32) << r.variant << std::setw(16) << name << std::setw(12)
          << m.accuracy << m.f1.macro << '\n';
    }
    if (r.gzsl) {
      out << "  seen F1 " << r.gzsl->seen_f1 << "  unseen F1 " << r.gzsl->unseen_f1
          << "  gap " << r.gzsl->balance_gap << '\n';
    }
  }
  out.unsetf(std::ios::floatfield);
}

int cmd_train(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto verb = load_verbalizer(ctx, *l.backend);
  const auto exp = experiment_config(ctx);
  std::vector<std::string> langs;
  if (!exp.train_language.empty()) langs.push_back(exp.train_language);
  const auto corpus = load_corpus(ctx.path("train_corpus")).filter_languages(langs);
  const auto samples =
      sample_few_shot(corpus, exp.train.shots_per_class, exp.train.seed, verb.classes);
  ctx.log("training on " + std::to_string(samples.size()) + " samples");
  const auto result = train(exp.train, samples, verb, *l.backend);
  save_prompt(result.prompt, ctx.out_dir / "prompt.bin");
  write_training_log(result.log, ctx.out_dir / "train_log.jsonl");
  *ctx.out << "trained " << result.log.size() << " steps; prompt "
           << result.prompt.length() << " x " << result.prompt.dim << " -> "
           << (ctx.out_dir / "prompt.bin").string() << '\n';
  if (!result.log.empty()) {
    *ctx.out << "final loss " << result.log.back().total << " (ce "
             << result.log.back().ce << ", omega " << result.log.back().omega << ")\n";
  }
  return kExitOk;
}

int cmd_classify(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto prompt = require_prompt(ctx, *l.backend);
  const auto labels = inference_labels(ctx);
  const auto verb = build_inference_verbalizer(labels, l.backend->embeddings(),
                                               l.backend->tokenizer(),
                                               ctx.get<std::size_t>("inference.k"));
  const auto input = load_corpus(ctx.path("input"), CorpusFormat::Auto, std::nullopt, false);
  std::vector<std::string> texts;
  for (const auto& ex : input.examples) texts.push_back(ex.text);
  const auto preds =
      classify_all(texts, prompt, verb, *l.backend,
                   parse_aggregate_on(ctx.get<std::string>("inference.aggregate_on")));
  std::ostringstream lines;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ojson scores = ojson::object();
    for (std::size_t c = 0; c < preds[i].scores.classes.size(); ++c) {
      scores[preds[i].scores.classes[c]] = preds[i].scores.scores[c];
    }
    lines << ojson{{"id", input.examples[i].id},
                   {"predicted_class", preds[i].label()},
                   {"scores", scores}}.dump()
          << '\n';
  }
  write_text_file(ctx.out_dir / "predictions.jsonl", lines.str());
  *ctx.out << "classified " << preds.size() << " documents -> "
           << (ctx.out_dir / "predictions.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_eval(const Context& ctx, bool protocol) {
  const auto l = load_backend(ctx);
  const auto sets = eval_sets(ctx);
  const auto exp = experiment_config(ctx);
  RunReport report;
  if (protocol) {
    const auto verb = load_verbalizer(ctx, *l.backend);
    const auto corpus = load_corpus(ctx.path("train_corpus"));
    const auto seeds = ctx.get<std::vector<std::uint64_t>>("seeds");
    report = run_protocol(corpus, verb, sets, exp, seeds, *l.backend);
  } else {
    const auto prompt = require_prompt(ctx, *l.backend);
    report.variant = "checkpoint";
    report.config = exp.to_json();
    report.config["prompt"] = ctx.get<std::string>("prompt");
    report.seeds = {exp.train.seed};
    SeedRun run;
    run.seed = exp.train.seed;
    run.steps = prompt.trained_steps;
    for (const auto& set : sets) {
      run.evals.emplace_back(set.name,
                             evaluate(set, prompt, *l.backend, exp.aggregate_on, exp.languages));
    }
    report.mean = run.evals;
    report.runs.push_back(std::move(run));
  }
  const std::vector<RunReport> reports{report};
  write_report_files(ctx, "report", reports);
  print_summary(*ctx.out, reports);
  return kExitOk;
}

int cmd_gzsl(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto verb = load_verbalizer(ctx, *l.backend);
  const auto labels = inference_labels(ctx);
  const auto exp = experiment_config(ctx);
  const auto train_corpus = load_corpus(ctx.path("train_corpus"));
  auto test_path = ctx.get<std::string>("gzsl.test_corpus");
  const auto test_corpus = load_corpus(
      test_path.empty() ? ctx.path("train_corpus") : ctx.resolve(test_path),
      CorpusFormat::Auto, names_of(labels));
  GzslOptions opt;
  opt.repetitions = ctx.get<std::size_t>("gzsl.repetitions");
  opt.seen_fraction = ctx.get<double>("gzsl.seen_fraction");
  opt.master_seed = exp.train.seed;
  opt.k = ctx.get<std::size_t>("inference.k");
  const std::vector<RunReport> reports{
      gzsl_protocol(train_corpus, test_corpus, verb, labels, exp, opt, *l.backend)};
  write_report_files(ctx, "gzsl_report", reports);
  print_summary(*ctx.out, reports);
  return kExitOk;
}

int cmd_ablate(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto verb = load_verbalizer(ctx, *l.backend);
  const auto sets = eval_sets(ctx);
  const auto corpus = load_corpus(ctx.path("train_corpus"));
  const auto seeds = ctx.get<std::vector<std::uint64_t>>("seeds");
  std::vector<RunReport> reports;
  for (const auto& variant : ablation_matrix(experiment_config(ctx))) {
    ctx.log("running variant " + variant.variant);
    reports.push_back(run_protocol(corpus, verb, sets, variant, seeds, *l.backend));
  }
  write_report_files(ctx, "ablation_report", reports);
  print_summary(*ctx.out, reports);
  return kExitOk;
}

int cmd_sweep_k(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto labels = inference_labels(ctx);
  SoftPrompt prompt;
  if (ctx.get<std::string>("prompt").empty()) {
    prompt = init_prompt_from_text(ctx.get<std::string>("train.init_text"), *l.backend);
    ctx.log("no checkpoint given; sweeping with the text-initialized prompt");
  } else {
    prompt = require_prompt(ctx, *l.backend);
  }
  const auto dev = load_corpus(ctx.path("sweep.dev_corpus"), CorpusFormat::Auto,
                               names_of(labels))
                       .filter_languages(ctx.get<std::vector<std::string>>("languages"));
  std::vector<std::pair<std::string, LabeledCorpus>> dev_sets;
  for (const auto& lang : dev.languages()) {
    dev_sets.emplace_back(lang, dev.filter_languages(std::vector<std::string>{lang}));
  }
  const auto ks = ctx.get<std::vector<std::size_t>>("sweep.k_candidates");
  const auto result =
      sweep_k(ks, dev_sets, prompt, *l.backend, labels,
              parse_aggregate_on(ctx.get<std::string>("inference.aggregate_on")));
  ojson j;
  j["chosen_k"] = result.chosen_k;
  ojson scores = ojson::array();
  for (const auto& s : result.scores) {
    ojson by_lang = ojson::object();
    for (const auto& [lang, acc] : s.accuracy_by_language) by_lang[lang] = acc;
    scores.push_back({{"k", s.k}, {"mean_accuracy", s.mean_accuracy},
                      {"accuracy_by_language", by_lang}});
  }
  j["scores"] = scores;
  write_text_file(ctx.out_dir / "k_sweep.json", j.dump(2) + "\n");
  *ctx.out << std::fixed << std::setprecision(4);
  for (const auto& s : result.scores) *ctx.out << "k=" << s.k << "  mean accuracy " << s.mean_accuracy << '\n';
  *ctx.out << "chosen k = " << result.chosen_k << '\n';
  return kExitOk;
}

int cmd_validate_verbalizer(const Context& ctx) {
  const auto l = load_backend(ctx);
  const auto path = ctx.path("verbalizer");
  const auto check = check_training_verbalizer(read_text(path), l.backend->embeddings(),
                                               l.backend->tokenizer());
  const bool strict = strictness(ctx) == LabelStrictness::Strict;
  const bool valid = strict ? check.valid_strict : check.valid_lenient;
  ojson diags = ojson::array();
  for (const auto& d : check.diagnostics) {
    diags.push_back({{"kind", std::string(kind_name(d.kind))}, {"class", d.class_name},
                     {"language", d.language}, {"word", d.word}, {"message", d.message}});
  }
  *ctx.out << ojson{{"verbalizer", path.string()},
                    {"mode", strict ? "strict" : "lenient"},
                    {"accepted_words", check.accepted_words},
                    {"valid", valid},
                    {"diagnostics", diags}}.dump(2)
           << '\n';
  if (valid) return kExitOk;
  const auto& first = check.diagnostics.front();
  const ErrorCode code = first.kind == VerbalizerDiagnostic::Kind::Overlap
                             ? ErrorCode::AmbiguousVerbalizer
                         : first.kind == VerbalizerDiagnostic::Kind::EmptyClass
                             ? ErrorCode::EmptyVerbalizer
                             : ErrorCode::InvalidLabelToken;
  throw Error(code, std::to_string(check.diagnostics.size()) +
                        " verbalizer diagnostic(s); first: " + first.message);
}

void emit_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << ojson{{"error", code}, {"message", message}}.dump() << '\n';
}

fs::path locate_config(const std::string& arg) {
  fs::path p(arg);
  if (p.is_relative() && !fs::exists(p)) {
    if (const char* dir = std::getenv(kConfigDirEnv); dir && *dir) {
      const fs::path alt = fs::path(dir) / p;
      if (fs::exists(alt)) return alt;
    }
  }
  if (!fs::exists(p)) throw Error(ErrorCode::FileNotFound, "config not found: " + arg);
  return p;
}

}  // namespace

nlohmann::ordered_json bundled_defaults(BackendKind kind, defaults::Dataset dataset,
                                        defaults::Method method) {
  const TrainConfig t = defaults::train_config(kind);
  ojson j;
  j["backend"] = {{"kind", std::string(kind_name(kind))},
                  {"embeddings", ""},
                  {"max_length", 512}};
  j["dataset"] = std::string(defaults::dataset_name(dataset));
  j["method"] = std::string(defaults::method_name(method));
  j["seed"] = 0;
  j["seeds"] = {0, 1, 2, 3};
  j["verbalizer"] = "";
  j["label_strictness"] = "strict";
  j["label_language"] = "en";
  j["train_corpus"] = "";
  j["train_language"] = "en";
  j["train"] = {{"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"epochs", t.epochs},
                {"epsilon", t.loss.epsilon},
                {"alpha", t.loss.alpha},
                {"prompt_length", t.prompt_length},
                {"shots_per_class", t.shots_per_class},
                {"init_text", t.init_text},
                {"max_steps", t.max_steps},
                {"max_grad_norm", t.max_grad_norm},
                {"optimizer",
                 {{"beta1", t.optimizer.beta1},
                  {"beta2", t.optimizer.beta2},
                  {"eps", t.optimizer.eps},
                  {"weight_decay", t.optimizer.weight_decay}}}};
  j["inference"] = {{"labels", ""},
                    {"k", defaults::neighborhood_number(method, dataset, kind)},
                    {"aggregate_on", "logits"}};
  j["eval"] = ojson::array();
  j["languages"] = ojson::array();
  j["prompt"] = "";
  j["input"] = "";
  j["gzsl"] = {{"repetitions", 4}, {"seen_fraction", 0.5}, {"test_corpus", ""}};
  j["sweep"] = {{"k_candidates", {1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20}},
                {"dev_corpus", ""}};
  j["output_dir"] = "out";
  return j;
}

void apply_override(nlohmann::ordered_json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    config_error("override '" + std::string(assignment) + "' must look like key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  ojson* node = &config;
  for (const auto& part : split_key(key)) {
    if (!node->is_object() || !node->contains(part)) {
      config_error("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
  }
  ojson value;
  try {
    value = ojson::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  if (node->is_string() && !value.is_string()) value = raw;
  *node = std::move(value);
}

nlohmann::ordered_json resolve_config(const nlohmann::ordered_json& file,
                                      const std::vector<std::string>& overrides) {
  if (!file.is_null() && !file.is_object()) config_error("config file must hold a JSON object");
  const ojson empty = ojson::object();
  const ojson& f = file.is_null() ? empty : file;
  const auto kind = parse_backend_kind(lookup_string(f, overrides, "backend.kind", "decoder-only"));
  const auto dataset = defaults::parse_dataset(lookup_string(f, overrides, "dataset", "sib200"));
  const auto method = defaults::parse_method(lookup_string(f, overrides, "method", "rosprompt"));
  ojson config = bundled_defaults(kind, dataset, method);
  merge_into(config, f, "");
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Soft-prompt training and zero-shot classification", "rosprompt"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir, prompt_path, input_path, verbalizer_path;
  bool verbose = false, lenient = false, protocol = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_option("-s,--set", overrides,
                    "Override a config key, e.g. --set train.alpha=10 (repeatable)");
    sub->add_option("--seed", seed, "Master seed (config key 'seed')");
    sub->add_option("-o,--out", out_dir, "Output directory (config key 'output_dir')");
    sub->add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  };
  auto with_prompt = [&](CLI::App* sub) {
    sub->add_option("--prompt", prompt_path, "Prompt checkpoint (config key 'prompt')");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a soft prompt on few-shot samples");
  common(train_cmd);
  auto* classify_cmd = app.add_subcommand("classify", "Classify documents with a trained prompt");
  common(classify_cmd);
  with_prompt(classify_cmd);
  classify_cmd->add_option("--input", input_path, "Documents to classify (config key 'input')");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint, or run the seeded protocol");
  common(eval_cmd);
  with_prompt(eval_cmd);
  eval_cmd->add_flag("--protocol", protocol,
                     "Train and evaluate once per configured seed instead of loading a checkpoint");
  auto* gzsl_cmd = app.add_subcommand("gzsl", "Seen/unseen class evaluation protocol");
  common(gzsl_cmd);
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the five-variant ablation grid");
  common(ablate_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep-k", "Select the neighborhood number on dev sets");
  common(sweep_cmd);
  with_prompt(sweep_cmd);
  auto* validate_cmd =
      app.add_subcommand("validate-verbalizer", "Check a training verbalizer document");
  common(validate_cmd);
  validate_cmd->add_option("--verbalizer", verbalizer_path,
                           "Verbalizer document (config key 'verbalizer')");
  validate_cmd->add_flag("--lenient", lenient,
                         "Report multi-token labels without failing (label_strictness=lenient)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    emit_error(err, "USAGE_ERROR", e.what());
    return kExitValidation;
  }
  CLI::App* sub = app.get_subcommands().front();

  try {
    ojson file;
    fs::path base_dir = fs::current_path();
    if (!config_path.empty()) {
      const fs::path p = locate_config(config_path);
      try {
        file = ojson::parse(read_text(p));
      } catch (const nlohmann::json::parse_error& e) {
        config_error(p.string() + ": " + e.what());
      }
      base_dir = fs::absolute(p).parent_path();
    }
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (!out_dir.empty()) overrides.push_back("output_dir=" + out_dir);
    if (!prompt_path.empty()) overrides.push_back("prompt=" + fs::absolute(prompt_path).string());
    if (!input_path.empty()) overrides.push_back("input=" + fs::absolute(input_path).string());
    if (!verbalizer_path.empty()) {
      overrides.push_back("verbalizer=" + fs::absolute(verbalizer_path).string());
    }
    if (lenient) overrides.push_back("label_strictness=lenient");

    Context ctx;
    ctx.config = resolve_config(file, overrides);
    ctx.base_dir = base_dir;
    ctx.verbose = verbose;
    ctx.out = &out;
    ctx.err = &err;
    {
      fs::path od(ctx.get<std::string>("output_dir"));
      ctx.out_dir = od.is_absolute() ? od : fs::current_path() / od;
    }
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec || !fs::is_directory(ctx.out_dir)) {
      config_error("output directory not writable: " + ctx.out_dir.string());
    }

    const std::string name = sub->get_name();
    if (name != "validate-verbalizer") {
      write_text_file(ctx.out_dir / "resolved_config.json", ctx.config.dump(2) + "\n");
    }
    if (name == "train") return cmd_train(ctx);
    if (name == "classify") return cmd_classify(ctx);
    if (name == "eval") return cmd_eval(ctx, protocol);
    if (name == "gzsl") return cmd_gzsl(ctx);
    if (name == "ablate") return cmd_ablate(ctx);
    if (name == "sweep-k") return cmd_sweep_k(ctx);
    return cmd_validate_verbalizer(ctx);
  } catch (const Error& e) {
    emit_error(err, code_name(e.code()), e.what());
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const nlohmann::json::exception& e) {
    emit_error(err, code_name(ErrorCode::InvalidConfig), e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    emit_error(err, "INTERNAL_ERROR", e.what());
    return kExitRuntime;
  }
}

}  // namespace rosprompt::cli
