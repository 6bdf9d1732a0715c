#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rosprompt/corpus.hpp"
#include "rosprompt/inference.hpp"
#include "rosprompt/trainer.hpp"

namespace rosprompt {

// Fraction of positions where predictions equal gold. Empty input gives 0.
double accuracy(std::span<const std::string> predictions,
                std::span<const std::string> gold);

struct ClassF1 {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when the class appears neither in gold nor in predictions; its F1 is
  // reported as 0.
  bool empty = false;
};

struct F1Report {
  std::vector<ClassF1> per_class;  // in the order of `classes`
  double macro = 0.0;
};

F1Report macro_f1(std::span<const std::string> predictions,
                  std::span<const std::string> gold,
                  std::span<const std::string> classes);

// Mean of `values` per group; keys without a group land in "other".
std::map<std::string, double> group_by_tag(const std::map<std::string, double>& values,
                                           const std::map<std::string, std::string>& groups);

// An evaluation dataset with its own classes and inference labels.
struct EvalSet {
  std::string name;
  LabeledCorpus corpus;
  ClassLabels class_labels;
  std::size_t k = 1;
};

struct ExperimentConfig {
  std::string variant = "full";
  TrainConfig train;
  // Language whose examples form the few-shot pool; empty keeps all.
  std::string train_language = "en";
  // Replace every training label set with its single label in this language.
  bool single_language_labels = false;
  std::string label_language = "en";
  AggregateOn aggregate_on = AggregateOn::Logits;
  // Evaluation language filter; empty keeps all.
  std::vector<std::string> languages;

  nlohmann::ordered_json to_json() const;
};

// The ablation grid around `base`: full, no penalty, no smoothing, neither,
// and single-language labels.
std::vector<ExperimentConfig> ablation_matrix(const ExperimentConfig& base);

struct EvalMetrics {
  std::map<std::string, double> accuracy_by_language;
  double accuracy = 0.0;
  F1Report f1;
  std::size_t documents = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  double final_loss = 0.0;
  std::vector<std::pair<std::string, EvalMetrics>> evals;
};

struct GzslRepetition {
  std::size_t index = 0;
  std::vector<std::string> seen;
  std::vector<std::string> unseen;
  std::vector<std::string> train_ids;
  F1Report f1;
  double seen_f1 = 0.0;
  double unseen_f1 = 0.0;
};

struct GzslSummary {
  std::vector<GzslRepetition> repetitions;
  double seen_f1 = 0.0;
  double unseen_f1 = 0.0;
  double balance_gap = 0.0;
};

struct RunReport {
  std::string variant;
  nlohmann::ordered_json config;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedRun> runs;
  // Seed-averaged metrics per eval set.
  std::vector<std::pair<std::string, EvalMetrics>> mean;
  std::optional<GzslSummary> gzsl;

  nlohmann::ordered_json to_json() const;
};

// Classifies every document of `set` (after the language filter) and scores it.
EvalMetrics evaluate(const EvalSet& set, const SoftPrompt& prompt,
                     const Backend& backend, AggregateOn on,
                     std::span<const std::string> languages = {});

// Per seed: sample the few-shot set, train, evaluate every eval set, then
// average over seeds.
RunReport run_protocol(const LabeledCorpus& train_corpus,
                       const TrainingVerbalizer& verbalizer,
                       std::span<const EvalSet> eval_sets,
                       const ExperimentConfig& config,
                       std::span<const std::uint64_t> seeds, const Backend& backend,
                       const BatchObserver& observer = {});

struct GzslOptions {
  std::size_t repetitions = 4;
  // Seen-class count is ceil(fraction * |catalog|), clamped to [1, |catalog|-1].
  double seen_fraction = 0.5;
  std::uint64_t master_seed = 0;
  std::size_t k = 1;
};

// Per repetition: draw a seen subset, train on seen-class examples only, and
// evaluate on every class of `test_corpus`.
RunReport gzsl_protocol(const LabeledCorpus& train_corpus,
                        const LabeledCorpus& test_corpus,
                        const TrainingVerbalizer& verbalizer,
                        const ClassLabels& class_labels,
                        const ExperimentConfig& config, const GzslOptions& options,
                        const Backend& backend, const BatchObserver& observer = {});

// Seen classes for one repetition, in catalog order.
std::vector<std::string> gzsl_seen_classes(std::span<const std::string> catalog,
                                           double seen_fraction,
                                           std::uint64_t master_seed,
                                           std::size_t repetition);

// Pretty JSON (2-space indent, trailing newline).
std::string report_json(const RunReport& report);
// Flat rows: variant,seed,language,metric,value. Averages use seed "mean".
std::string report_csv(std::span<const RunReport> reports);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rosprompt
