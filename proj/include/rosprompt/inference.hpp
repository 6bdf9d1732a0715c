#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rosprompt/corpus.hpp"
#include "rosprompt/model_adapter.hpp"
#include "rosprompt/verbalizer.hpp"

namespace rosprompt {

// Aggregation input: raw logits (default) or their softmax.
enum class AggregateOn { Logits, Probs };

std::string_view aggregate_name(AggregateOn on) noexcept;
AggregateOn parse_aggregate_on(std::string_view name);

struct ClassScores {
  std::vector<std::string> classes;
  std::vector<double> scores;  // parallel to classes
};

// Q(c|x) = sum over the class neighborhood of weight * values[token].
ClassScores aggregate_scores(std::span<const double> values,
                             const InferenceVerbalizer& verbalizer);

// Index of the maximal score; the first class wins exact ties.
std::size_t predict(const ClassScores& scores);

struct Classification {
  std::size_t class_index = 0;
  ClassScores scores;

  const std::string& label() const { return scores.classes[class_index]; }
};

Classification classify(std::string_view text, const SoftPrompt& prompt,
                        const InferenceVerbalizer& verbalizer, const Backend& backend,
                        AggregateOn on = AggregateOn::Logits);

// Documents are scored in parallel; output order matches input order.
std::vector<Classification> classify_all(std::span<const std::string> texts,
                                         const SoftPrompt& prompt,
                                         const InferenceVerbalizer& verbalizer,
                                         const Backend& backend,
                                         AggregateOn on = AggregateOn::Logits);

struct KScore {
  std::size_t k = 0;
  double mean_accuracy = 0.0;
  std::vector<std::pair<std::string, double>> accuracy_by_language;
};

// chosen_k maximizes mean accuracy; ties go to the smallest k.
struct KSweepResult {
  std::vector<KScore> scores;  // ascending k
  std::size_t chosen_k = 0;
};

// Per candidate k: rebuild the inference verbalizer, measure accuracy on every
// dev set, and average across them.
KSweepResult sweep_k(std::span<const std::size_t> k_candidates,
                     std::span<const std::pair<std::string, LabeledCorpus>> dev_sets,
                     const SoftPrompt& prompt, const Backend& backend,
                     const ClassLabels& class_labels,
                     AggregateOn on = AggregateOn::Logits);

}  // namespace rosprompt
