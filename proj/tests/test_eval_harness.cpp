#include <set>

#include "doctest.h"
#include "rosprompt/error.hpp"
#include "rosprompt/eval_harness.hpp"
#include "rosprompt/synthetic.hpp"
#include "test_support.hpp"

using namespace rosprompt;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

struct Fixture {
  SyntheticTask task = make_synthetic_task({}, 7);
  ToyBackend backend{task.table};
  TrainingVerbalizer verbalizer =
      parse_training_verbalizer(task.verbalizer_json, *task.table, backend.tokenizer());
  ExperimentConfig config = [] {
    ExperimentConfig c;
    c.train.learning_rate = 0.03;
    c.train.loss = {0.1, 1.0};
    c.train.epochs = 2;
    return c;
  }();
  std::vector<EvalSet> sets() const { return {{"toy", task.test, task.labels, 3}}; }
};

}  // namespace

TEST_CASE("accuracy") {
  const std::vector<std::string> g{"a", "b", "a", "c"};
  CHECK(accuracy(g, g) == 1.0);
  CHECK(accuracy(std::vector<std::string>{"x", "x", "x", "x"}, g) == 0.0);
  CHECK(accuracy(std::vector<std::string>{"a", "b", "a", "a"}, g) == 0.75);
  CHECK(accuracy(std::vector<std::string>{}, std::vector<std::string>{}) == 0.0);
  CHECK_THROWS_AS(accuracy(std::vector<std::string>{"a"}, g), Error);
}

TEST_CASE("macro F1") {
  SUBCASE("perfect") {
    const std::vector<std::string> g{"a", "b", "c"}, classes{"a", "b", "c"};
    const auto r = macro_f1(g, g, classes);
    for (const auto& c : r.per_class) CHECK(c.f1 == 1.0);
    CHECK(r.macro == 1.0);
  }
  SUBCASE("empty class is zero and flagged") {
    const std::vector<std::string> g{"a", "a"}, classes{"a", "z"};
    const auto r = macro_f1(g, g, classes);
    CHECK(r.per_class[1].empty);
    CHECK(r.per_class[1].f1 == 0.0);
    CHECK(r.macro == 0.5);
  }
  SUBCASE("hand example with P = (1, 0.5) and R = (1, 1)") {
    const std::vector<std::string> pred{"A", "B", "B"}, gold{"A", "B", "C"}, classes{"A", "B"};
    const auto r = macro_f1(pred, gold, classes);
    CHECK(r.per_class[0].precision == 1.0);
    CHECK(r.per_class[1].precision == 0.5);
    CHECK(r.per_class[1].recall == 1.0);
    CHECK(std::abs(r.per_class[1].f1 - 0.6667) <= 1e-4);
    CHECK(std::abs(r.macro - 0.8333) <= 1e-4);
  }
}

TEST_CASE("metrics agree with a brute-force confusion matrix") {
  Rng rng(31, "confusion");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.index(5), n = rng.index(30);
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
    std::vector<std::string> pred(n), gold(n);
    std::vector<std::vector<int>> m(k, std::vector<int>(k, 0));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = rng.index(k), g = rng.index(k);
      pred[i] = classes[p];
      gold[i] = classes[g];
      ++m[g][p];
    }
    int diag = 0;
    for (std::size_t c = 0; c < k; ++c) diag += m[c][c];
    CHECK(accuracy(pred, gold) == doctest::Approx(n ? double(diag) / double(n) : 0.0));

    const auto r = macro_f1(pred, gold, classes);
    double macro = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      int tp = m[c][c], col = 0, row = 0;
      for (std::size_t o = 0; o < k; ++o) {
        col += m[o][c];
        row += m[c][o];
      }
      const double p = col ? double(tp) / col : 0.0, rc = row ? double(tp) / row : 0.0;
      const double f1 = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
      CHECK(r.per_class[c].f1 == doctest::Approx(f1));
      CHECK(r.per_class[c].support == static_cast<std::size_t>(row));
      macro += f1 / static_cast<double>(k);
    }
    CHECK(r.macro == doctest::Approx(macro));
  }
}

TEST_CASE("group_by_tag") {
  const auto g = group_by_tag({{"de", 0.5}, {"fr", 0.7}, {"ja", 0.2}, {"sw", 0.9}},
                              {{"de", "Germanic"}, {"fr", "Romance"}, {"ja", "Japonic"}});
  CHECK(g.at("Germanic") == 0.5);
  CHECK(g.at("other") == 0.9);
  CHECK(g.size() == 4);
}

TEST_CASE("corpus loading") {
  SUBCASE("JSON lines") {
    const auto c = parse_corpus(
        "{\"id\":\"1\",\"text\":\"a\",\"label\":\"x\",\"lang\":\"en\"}\n"
        "{\"id\":\"2\",\"text\":\"b\",\"label\":\"y\",\"lang\":\"de\"}\n\n"
        "{\"id\":\"3\",\"text\":\"c\",\"label\":\"x\"}\n",
        CorpusFormat::JsonLines);
    CHECK(c.size() == 3);
    CHECK(c.classes == std::vector<std::string>{"x", "y"});
    CHECK(c.examples[2].language == "und");
    CHECK(c.languages() == std::vector<std::string>{"en", "de", "und"});
  }
  SUBCASE("CSV with quoting") {
    const auto c = parse_corpus(
        "id,text,label,lang\n1,\"hello, world\",x,en\n2,\"say \"\"hi\"\"\",y,en\n",
        CorpusFormat::Csv);
    CHECK(c.size() == 2);
    CHECK(c.examples[0].text == "hello, world");
    CHECK(c.examples[1].text == "say \"hi\"");
  }
  SUBCASE("errors") {
    CHECK(code_of([] {
            parse_corpus("{\"id\":\"1\",\"text\":\"a\"}\n", CorpusFormat::JsonLines);
          }) == ErrorCode::MalformedRecord);
    CHECK(code_of([] {
            parse_corpus("{\"id\":\"1\",\"text\":\"a\",\"label\":\"x\"}\n"
                         "{\"id\":\"1\",\"text\":\"b\",\"label\":\"x\"}\n",
                         CorpusFormat::JsonLines);
          }) == ErrorCode::DuplicateId);
    const std::vector<std::string> catalog{"x"};
    CHECK(code_of([&] {
            parse_corpus("{\"id\":\"1\",\"text\":\"a\",\"label\":\"q\"}\n",
                         CorpusFormat::JsonLines, catalog);
          }) == ErrorCode::UnknownClass);
    CHECK(code_of([] { parse_corpus("{not json\n", CorpusFormat::JsonLines); }) ==
          ErrorCode::MalformedRecord);
    CHECK(code_of([] { load_corpus("/nonexistent/corpus.jsonl"); }) == ErrorCode::FileNotFound);
  }
  SUBCASE("unlabeled input") {
    const auto c =
        parse_corpus("{\"id\":\"1\",\"text\":\"a\"}\n", CorpusFormat::JsonLines, {}, false);
    CHECK(c.size() == 1);
  }
  SUBCASE("format detection from the file name") {
    testing::TempDir dir;
    dir.write("c.csv", "id,text,label,lang\n1,a,x,en\n");
    CHECK(load_corpus(dir / "c.csv").size() == 1);
  }
}

TEST_CASE("ablation matrix") {
  ExperimentConfig base;
  base.train.loss = {0.2, 100.0};
  const auto m = ablation_matrix(base);
  REQUIRE(m.size() == 5);
  CHECK(m[0].variant == "full");
  CHECK(m[1].train.loss.alpha == 0.0);
  CHECK(m[1].train.loss.epsilon == 0.2);
  CHECK(m[2].train.loss.epsilon == 0.0);
  CHECK(m[2].train.loss.alpha == 100.0);
  CHECK(m[3].train.loss.alpha == 0.0);
  CHECK(m[3].train.loss.epsilon == 0.0);
  CHECK(m[4].single_language_labels);
  CHECK(m[4].train.loss.alpha == 100.0);
}

TEST_CASE("run_protocol") {
  Fixture f;
  const auto sets = f.sets();

  SUBCASE("one seed averages to that run") {
    const std::vector<std::uint64_t> seeds{3};
    const auto r = run_protocol(f.task.train, f.verbalizer, sets, f.config, seeds, f.backend);
    REQUIRE(r.runs.size() == 1);
    CHECK(r.mean[0].second.accuracy == r.runs[0].evals[0].second.accuracy);
    CHECK(r.seeds == seeds);
  }

  SUBCASE("identical seeds give identical runs") {
    const std::vector<std::uint64_t> seeds{4, 4, 4, 4};
    const auto r = run_protocol(f.task.train, f.verbalizer, sets, f.config, seeds, f.backend);
    for (const auto& run : r.runs) {
      CHECK(run.evals[0].second.accuracy == r.mean[0].second.accuracy);
      CHECK(run.final_loss == r.runs[0].final_loss);
    }
  }

  SUBCASE("matches a manual composition of the modules") {
    const std::vector<std::uint64_t> seeds{11};
    const auto r = run_protocol(f.task.train, f.verbalizer, sets, f.config, seeds, f.backend);
    TrainConfig tc = f.config.train;
    tc.seed = 11;
    const auto samples = sample_few_shot(f.task.train, tc.shots_per_class, 11);
    const auto trained = train(tc, samples, f.verbalizer, f.backend);
    const auto inf = build_inference_verbalizer(f.task.labels, *f.task.table,
                                                f.backend.tokenizer(), 3);
    std::vector<std::string> pred, gold;
    for (const auto& ex : f.task.test.examples) {
      pred.push_back(classify(ex.text, trained.prompt, inf, f.backend).label());
      gold.push_back(ex.label);
    }
    CHECK(r.runs[0].evals[0].second.accuracy == accuracy(pred, gold));
    CHECK(r.runs[0].final_loss == trained.log.back().total);
    CHECK(r.runs[0].evals[0].second.f1.macro == macro_f1(pred, gold, f.task.test.classes).macro);
  }

  SUBCASE("language filter and per-language accuracy") {
    f.config.languages = {"xx"};
    const std::vector<std::uint64_t> seeds{1};
    const auto r = run_protocol(f.task.train, f.verbalizer, sets, f.config, seeds, f.backend);
    const auto& m = r.runs[0].evals[0].second;
    CHECK(m.accuracy_by_language.size() == 1);
    CHECK(m.accuracy_by_language.count("xx") == 1);
    CHECK(m.documents == f.task.test.size() / 2);
  }

  SUBCASE("empty seed list") {
    CHECK(code_of([&] {
            run_protocol(f.task.train, f.verbalizer, sets, f.config, {}, f.backend);
          }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("gzsl protocol") {
  Fixture f;
  GzslOptions opts;
  opts.master_seed = 21;
  opts.k = 3;

  SUBCASE("splits partition the catalog and are reproducible") {
    const std::vector<std::string> catalog{"a", "b", "c", "d", "e"};
    std::set<std::vector<std::string>> distinct;
    for (std::size_t rep = 0; rep < 6; ++rep) {
      const auto seen = gzsl_seen_classes(catalog, 0.5, 21, rep);
      CHECK(seen.size() == 3);
      CHECK(seen == gzsl_seen_classes(catalog, 0.5, 21, rep));
      distinct.insert(seen);
    }
    CHECK(distinct.size() > 1);
    CHECK(gzsl_seen_classes(catalog, 0.99, 1, 0).size() == 4);
    CHECK(code_of([&] { gzsl_seen_classes(std::vector<std::string>{"a"}, 0.5, 1, 0); }) ==
          ErrorCode::InvalidConfig);
  }

  SUBCASE("one repetition with all but one class seen") {
    opts.repetitions = 1;
    opts.seen_fraction = 0.6;  // ceil(1.8) = 2 of 3
    const auto r = gzsl_protocol(f.task.train, f.task.test, f.verbalizer, f.task.labels,
                                 f.config, opts, f.backend);
    REQUIRE(r.gzsl);
    const auto& rep = r.gzsl->repetitions[0];
    CHECK(rep.seen.size() == 2);
    REQUIRE(rep.unseen.size() == 1);
    double unseen = 0.0;
    for (const auto& c : rep.f1.per_class) {
      if (c.name == rep.unseen[0]) unseen = c.f1;
    }
    CHECK(rep.unseen_f1 == unseen);
    CHECK(r.gzsl->balance_gap == doctest::Approx(std::abs(r.gzsl->seen_f1 - r.gzsl->unseen_f1)));
  }

  SUBCASE("no unseen examples reach training") {
    std::vector<std::vector<std::string>> batches_by_rep;
    const auto r = gzsl_protocol(f.task.train, f.task.test, f.verbalizer, f.task.labels,
                                 f.config, opts, f.backend,
                                 [&](std::size_t step, std::span<const FewShotSample* const> b) {
                                   if (step == 1) batches_by_rep.emplace_back();
                                   for (const auto* s : b) batches_by_rep.back().push_back(s->label);
                                 });
    REQUIRE(batches_by_rep.size() == 4);
    for (std::size_t rep = 0; rep < 4; ++rep) {
      const auto& seen = r.gzsl->repetitions[rep].seen;
      for (const auto& label : batches_by_rep[rep]) {
        CHECK(std::find(seen.begin(), seen.end(), label) != seen.end());
      }
    }
  }

  SUBCASE("report is byte-identical on rerun") {
    const auto a = gzsl_protocol(f.task.train, f.task.test, f.verbalizer, f.task.labels,
                                 f.config, opts, f.backend);
    const auto b = gzsl_protocol(f.task.train, f.task.test, f.verbalizer, f.task.labels,
                                 f.config, opts, f.backend);
    CHECK(report_json(a) == report_json(b));
    const std::vector<RunReport> both{a};
    CHECK(report_csv(both).find("gzsl/seen_f1") != std::string::npos);
  }
}

TEST_CASE("report serialization") {
  Fixture f;
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto r =
      run_protocol(f.task.train, f.verbalizer, f.sets(), f.config, seeds, f.backend);
  const auto json = report_json(r);
  CHECK(json.back() == '\n');
  const auto parsed = nlohmann::json::parse(json);
  CHECK(parsed["seed_count"] == 2);
  CHECK(parsed["variant"] == "full");
  const std::vector<RunReport> reports{r};
  const auto csv = report_csv(reports);
  CHECK(csv.rfind("variant,seed,language,metric,value\n", 0) == 0);
  CHECK(csv.find("full,mean,") != std::string::npos);
  CHECK(csv.find("toy/accuracy") != std::string::npos);
}
