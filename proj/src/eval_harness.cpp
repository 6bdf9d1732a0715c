#include "rosprompt/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rosprompt/error.hpp"
#include "rosprompt/rng.hpp"

namespace rosprompt {

namespace {

using ojson = nlohmann::ordered_json;

void check_aligned(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "predictions and gold differ in length");
  }
}

ojson f1_json(const F1Report& f1) {
  ojson per = ojson::object();
  for (const auto& c : f1.per_class) {
    per[c.name] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                   {"support", c.support}, {"empty", c.empty}};
  }
  return {{"macro_f1", f1.macro}, {"per_class", per}};
}

ojson metrics_json(const EvalMetrics& m) {
  ojson j;
  j["documents"] = m.documents;
  j["accuracy"] = m.accuracy;
  j["accuracy_by_language"] = ojson(m.accuracy_by_language);
  j["f1"] = f1_json(m.f1);
  return j;
}

std::string csv_number(double v) { return ojson(v).dump(); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void csv_metrics(std::ostringstream& out, const std::string& variant,
                 const std::string& seed, const std::string& set,
                 const EvalMetrics& m) {
  auto row = [&](const std::string& lang, const std::string& metric, double v) {
    out << csv_escape(variant) << ',' << seed << ',' << csv_escape(lang) << ','
        << csv_escape(metric) << ',' << csv_number(v) << '\n';
  };
  for (const auto& [lang, acc] : m.accuracy_by_language) row(lang, set + "/accuracy", acc);
  row("all", set + "/accuracy", m.accuracy);
  row("all", set + "/macro_f1", m.f1.macro);
  for (const auto& c : m.f1.per_class) row("all", set + "/f1/" + c.name, c.f1);
}

EvalMetrics average(std::span<const EvalMetrics* const> items) {
  EvalMetrics out;
  const double n = static_cast<double>(items.size());
  out.f1 = items.front()->f1;
  for (auto& c : out.f1.per_class) c.precision = c.recall = c.f1 = 0.0;
  out.f1.macro = 0.0;
  out.documents = items.front()->documents;
  for (const EvalMetrics* m : items) {
    for (const auto& [lang, acc] : m->accuracy_by_language) {
      out.accuracy_by_language[lang] += acc / n;
    }
    out.accuracy += m->accuracy / n;
    out.f1.macro += m->f1.macro / n;
    for (std::size_t c = 0; c < out.f1.per_class.size(); ++c) {
      out.f1.per_class[c].precision += m->f1.per_class[c].precision / n;
      out.f1.per_class[c].recall += m->f1.per_class[c].recall / n;
      out.f1.per_class[c].f1 += m->f1.per_class[c].f1 / n;
    }
  }
  return out;
}

}  // namespace

double accuracy(std::span<const std::string> predictions,
                std::span<const std::string> gold) {
  check_aligned(predictions, gold);
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

F1Report macro_f1(std::span<const std::string> predictions,
                  std::span<const std::string> gold,
                  std::span<const std::string> classes) {
  check_aligned(predictions, gold);
  if (classes.empty()) throw Error(ErrorCode::InvalidArgument, "no classes for F1");
  F1Report out;
  for (const auto& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = predictions[i] == c, g = gold[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    ClassF1 r;
    r.name = c;
    r.support = tp + fn;
    r.empty = tp + fp + fn == 0;
    r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    out.macro += r.f1;
    out.per_class.push_back(std::move(r));
  }
  out.macro /= static_cast<double>(classes.size());
  return out;
}

std::map<std::string, double> group_by_tag(const std::map<std::string, double>& values,
                                           const std::map<std::string, std::string>& groups) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& [key, v] : values) {
    auto it = groups.find(key);
    auto& slot = acc[it == groups.end() ? "other" : it->second];
    slot.first += v;
    ++slot.second;
  }
  std::map<std::string, double> out;
  for (const auto& [g, s] : acc) out[g] = s.first / static_cast<double>(s.second);
  return out;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  ojson j;
  j["variant"] = variant;
  j["train"] = {
      {"batch_size", train.batch_size},
      {"learning_rate", train.learning_rate},
      {"epochs", train.epochs},
      {"epsilon", train.loss.epsilon},
      {"alpha", train.loss.alpha},
      {"prompt_length", train.prompt_length},
      {"shots_per_class", train.shots_per_class},
      {"init_text", train.init_text},
      {"max_steps", train.max_steps},
      {"max_grad_norm", train.max_grad_norm},
      {"optimizer",
       {{"name", "adamw"},
        {"beta1", train.optimizer.beta1},
        {"beta2", train.optimizer.beta2},
        {"eps", train.optimizer.eps},
        {"weight_decay", train.optimizer.weight_decay}}},
  };
  j["train_language"] = train_language;
  j["single_language_labels"] = single_language_labels;
  j["label_language"] = label_language;
  j["aggregate_on"] = std::string(aggregate_name(aggregate_on));
  j["languages"] = languages;
  return j;
}

std::vector<ExperimentConfig> ablation_matrix(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out(5, base);
  out[0].variant = "full";
  out[1].variant = "no_penalty";
  out[1].train.loss.alpha = 0.0;
  out[2].variant = "no_label_smoothing";
  out[2].train.loss.epsilon = 0.0;
  out[3].variant = "no_penalty_no_label_smoothing";
  out[3].train.loss.alpha = 0.0;
  out[3].train.loss.epsilon = 0.0;
  out[4].variant = "no_multilingual_labels";
  out[4].single_language_labels = true;
  return out;
}

EvalMetrics evaluate(const EvalSet& set, const SoftPrompt& prompt,
                     const Backend& backend, AggregateOn on,
                     std::span<const std::string> languages) {
  const LabeledCorpus corpus = set.corpus.filter_languages(languages);
  const auto verbalizer = build_inference_verbalizer(set.class_labels, backend.embeddings(),
                                                     backend.tokenizer(), set.k);
  std::vector<std::string> texts, gold, predicted;
  for (const auto& ex : corpus.examples) {
    texts.push_back(ex.text);
    gold.push_back(ex.label);
  }
  for (const auto& c : classify_all(texts, prompt, verbalizer, backend, on)) {
    predicted.push_back(c.label());
  }
  EvalMetrics m;
  m.documents = gold.size();
  m.accuracy = accuracy(predicted, gold);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_lang;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& slot = per_lang[corpus.examples[i].language];
    slot.first += predicted[i] == gold[i];
    ++slot.second;
  }
  for (const auto& [lang, s] : per_lang) {
    m.accuracy_by_language[lang] =
        static_cast<double>(s.first) / static_cast<double>(s.second);
  }
  std::vector<std::string> classes;
  for (const auto& [name, label] : set.class_labels) classes.push_back(name);
  m.f1 = macro_f1(predicted, gold, classes);
  return m;
}

RunReport run_protocol(const LabeledCorpus& train_corpus,
                       const TrainingVerbalizer& verbalizer,
                       std::span<const EvalSet> eval_sets,
                       const ExperimentConfig& config,
                       std::span<const std::uint64_t> seeds, const Backend& backend,
                       const BatchObserver& observer) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "run_protocol needs seeds");
  const TrainingVerbalizer verb =
      config.single_language_labels
          ? verbalizer.single_language(backend.embeddings(), backend.tokenizer(),
                                       config.label_language)
          : verbalizer;
  std::vector<std::string> pool_langs;
  if (!config.train_language.empty()) pool_langs.push_back(config.train_language);
  const LabeledCorpus pool = train_corpus.filter_languages(pool_langs);

  RunReport report;
  report.variant = config.variant;
  report.config = config.to_json();
  report.seeds.assign(seeds.begin(), seeds.end());

  for (std::uint64_t seed : seeds) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    SeedRun run;
    run.seed = seed;
    try {
      const auto samples = sample_few_shot(pool, tc.shots_per_class, seed, verb.classes);
      const auto trained = train(tc, samples, verb, backend, observer);
      run.steps = trained.log.size();
      run.final_loss = trained.log.empty() ? 0.0 : trained.log.back().total;
      for (const auto& set : eval_sets) {
        run.evals.emplace_back(set.name, evaluate(set, trained.prompt, backend,
                                                  config.aggregate_on, config.languages));
      }
    } catch (const Error& e) {
      throw Error(e.code(), "variant '" + config.variant + "', seed " +
                                std::to_string(seed) + ": " + e.what());
    }
    report.runs.push_back(std::move(run));
  }

  for (std::size_t s = 0; s < eval_sets.size(); ++s) {
    std::vector<const EvalMetrics*> items;
    for (const auto& run : report.runs) items.push_back(&run.evals[s].second);
    report.mean.emplace_back(eval_sets[s].name, average(items));
  }
  return report;
}

std::vector<std::string> gzsl_seen_classes(std::span<const std::string> catalog,
                                           double seen_fraction,
                                           std::uint64_t master_seed,
                                           std::size_t repetition) {
  if (catalog.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "GZSL needs at least two classes");
  }
  if (!(seen_fraction > 0.0 && seen_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "seen_fraction must lie in (0, 1)");
  }
  auto n_seen = static_cast<std::size_t>(
      std::ceil(seen_fraction * static_cast<double>(catalog.size())));
  n_seen = std::clamp<std::size_t>(n_seen, 1, catalog.size() - 1);
  std::vector<std::size_t> order(catalog.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(master_seed, "gzsl-split", repetition);
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(n_seen);
  std::sort(order.begin(), order.end());
  std::vector<std::string> seen;
  for (std::size_t i : order) seen.push_back(catalog[i]);
  return seen;
}

RunReport gzsl_protocol(const LabeledCorpus& train_corpus,
                        const LabeledCorpus& test_corpus,
                        const TrainingVerbalizer& verbalizer,
                        const ClassLabels& class_labels,
                        const ExperimentConfig& config, const GzslOptions& options,
                        const Backend& backend, const BatchObserver& observer) {
  if (options.repetitions < 1) {
    throw Error(ErrorCode::InvalidConfig, "GZSL needs at least one repetition");
  }
  std::vector<std::string> catalog;
  for (const auto& [name, label] : class_labels) catalog.push_back(name);
  const TrainingVerbalizer full =
      config.single_language_labels
          ? verbalizer.single_language(backend.embeddings(), backend.tokenizer(),
                                       config.label_language)
          : verbalizer;

  RunReport report;
  report.variant = config.variant;
  report.config = config.to_json();
  report.config["gzsl"] = {{"repetitions", options.repetitions},
                           {"seen_fraction", options.seen_fraction},
                           {"master_seed", options.master_seed},
                           {"k", options.k}};
  GzslSummary summary;
  const EvalSet test{"gzsl", test_corpus, class_labels, options.k};
  std::vector<std::string> pool_langs;
  if (!config.train_language.empty()) pool_langs.push_back(config.train_language);

  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    GzslRepetition r;
    r.index = rep;
    r.seen = gzsl_seen_classes(catalog, options.seen_fraction, options.master_seed, rep);
    for (const auto& c : catalog) {
      if (std::find(r.seen.begin(), r.seen.end(), c) == r.seen.end()) r.unseen.push_back(c);
    }
    // Unseen-class examples are removed before sampling.
    const LabeledCorpus pool =
        train_corpus.filter_languages(pool_langs).filter_classes(r.seen);
    const TrainingVerbalizer verb = full.restricted_to(r.seen);

    TrainConfig tc = config.train;
    tc.seed = derive_seed(options.master_seed, "gzsl-train", rep);
    report.seeds.push_back(tc.seed);

    const auto samples = sample_few_shot(pool, tc.shots_per_class, tc.seed, verb.classes);
    for (const auto& s : samples) r.train_ids.push_back(s.id);
    const auto trained = train(tc, samples, verb, backend, observer);

    SeedRun run;
    run.seed = tc.seed;
    run.steps = trained.log.size();
    run.final_loss = trained.log.empty() ? 0.0 : trained.log.back().total;
    run.evals.emplace_back(test.name, evaluate(test, trained.prompt, backend,
                                               config.aggregate_on, config.languages));
    r.f1 = run.evals.back().second.f1;
    for (const auto& c : r.f1.per_class) {
      const bool seen = std::find(r.seen.begin(), r.seen.end(), c.name) != r.seen.end();
      (seen ? r.seen_f1 : r.unseen_f1) += c.f1;
    }
    r.seen_f1 /= static_cast<double>(r.seen.size());
    r.unseen_f1 /= static_cast<double>(r.unseen.size());
    summary.seen_f1 += r.seen_f1 / static_cast<double>(options.repetitions);
    summary.unseen_f1 += r.unseen_f1 / static_cast<double>(options.repetitions);
    summary.repetitions.push_back(std::move(r));
    report.runs.push_back(std::move(run));
  }
  summary.balance_gap = std::abs(summary.seen_f1 - summary.unseen_f1);

  std::vector<const EvalMetrics*> items;
  for (const auto& run : report.runs) items.push_back(&run.evals.front().second);
  report.mean.emplace_back(test.name, average(items));
  report.gzsl = std::move(summary);
  return report;
}

nlohmann::ordered_json RunReport::to_json() const {
  ojson j;
  j["variant"] = variant;
  j["config"] = config;
  j["seed_count"] = seeds.size();
  j["seeds"] = seeds;
  ojson runs_j = ojson::array();
  for (const auto& run : runs) {
    ojson r;
    r["seed"] = run.seed;
    r["steps"] = run.steps;
    r["final_loss"] = run.final_loss;
    ojson evals = ojson::object();
    for (const auto& [name, m] : run.evals) evals[name] = metrics_json(m);
    r["eval"] = evals;
    runs_j.push_back(r);
  }
  j["runs"] = runs_j;
  ojson mean_j = ojson::object();
  for (const auto& [name, m] : mean) mean_j[name] = metrics_json(m);
  j["mean"] = mean_j;
  if (gzsl) {
    ojson g;
    ojson reps = ojson::array();
    for (const auto& r : gzsl->repetitions) {
      reps.push_back({{"index", r.index},
                      {"seen", r.seen},
                      {"unseen", r.unseen},
                      {"seen_f1", r.seen_f1},
                      {"unseen_f1", r.unseen_f1},
                      {"f1", f1_json(r.f1)},
                      {"train_ids", r.train_ids}});
    }
    g["repetitions"] = reps;
    g["seen_f1"] = gzsl->seen_f1;
    g["unseen_f1"] = gzsl->unseen_f1;
    g["balance_gap"] = gzsl->balance_gap;
    j["gzsl"] = g;
  }
  return j;
}

std::string report_json(const RunReport& report) { return report.to_json().dump(2) + "\n"; }

std::string report_csv(std::span<const RunReport> reports) {
  std::ostringstream out;
  out << "variant,seed,language,metric,value\n";
  for (const auto& rep : reports) {
    for (const auto& run : rep.runs) {
      for (const auto& [name, m] : run.evals) {
        csv_metrics(out, rep.variant, std::to_string(run.seed), name, m);
      }
    }
    for (const auto& [name, m] : rep.mean) csv_metrics(out, rep.variant, "mean", name, m);
    if (rep.gzsl) {
      for (const auto& r : rep.gzsl->repetitions) {
        const std::string seed = std::to_string(rep.runs[r.index].seed);
        out << csv_escape(rep.variant) << ',' << seed << ",all,gzsl/seen_f1,"
            << csv_number(r.seen_f1) << '\n';
        out << csv_escape(rep.variant) << ',' << seed << ",all,gzsl/unseen_f1,"
            << csv_number(r.unseen_f1) << '\n';
      }
      out << csv_escape(rep.variant) << ",mean,all,gzsl/seen_f1,"
          << csv_number(rep.gzsl->seen_f1) << '\n';
      out << csv_escape(rep.variant) << ",mean,all,gzsl/unseen_f1,"
          << csv_number(rep.gzsl->unseen_f1) << '\n';
      out << csv_escape(rep.variant) << ",mean,all,gzsl/balance_gap,"
          << csv_number(rep.gzsl->balance_gap) << '\n';
    }
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace rosprompt
