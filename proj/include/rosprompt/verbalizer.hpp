#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rosprompt/vocab_embed.hpp"

namespace rosprompt {

// Per-language label words of one class, in document order.
using LanguageLabels = std::vector<std::pair<std::string, std::vector<std::string>>>;

// Curated multilingual label-token sets used during training.
//
// Invariants: at least one class; every set non-empty and duplicate-free;
// sets pairwise disjoint; every id in the vocabulary; and the total number of
// label tokens strictly below |V|. Class order is document order and is the
// tie-break order everywhere downstream.
struct TrainingVerbalizer {
  std::vector<std::string> classes;
  std::vector<std::vector<TokenId>> token_sets;  // parallel to classes
  std::vector<LanguageLabels> source_labels;     // provenance only

  std::size_t num_classes() const noexcept { return classes.size(); }
  // Throws UnknownClass.
  std::size_t class_index(std::string_view name) const;
  std::size_t total_tokens() const noexcept;

  // Throws the invariant violation as an Error.
  void validate(std::size_t vocab_size) const;

  // Keeps only the named classes, in this verbalizer's order.
  TrainingVerbalizer restricted_to(std::span<const std::string> keep) const;

  // Each class reduced to the first word listed under `language`. Throws
  // InvalidVerbalizer when a class has no entry for that language.
  TrainingVerbalizer single_language(const EmbeddingTable& table,
                                     const Tokenizer& tokenizer,
                                     std::string_view language = "en") const;
};

enum class LabelStrictness { Strict, Lenient };

struct VerbalizerDiagnostic {
  enum class Kind { MultiToken, UnknownToken, Overlap, EmptyClass, TooManyTokens };
  Kind kind;
  std::string class_name;
  std::string language;
  std::string word;
  std::string message;
};

std::string_view kind_name(VerbalizerDiagnostic::Kind kind) noexcept;

struct VerbalizerCheck {
  std::vector<VerbalizerDiagnostic> diagnostics;
  // Number of label words that tokenize to exactly one known token.
  std::size_t accepted_words = 0;
  // Whether loading would succeed under the given strictness.
  bool valid_strict = false;
  bool valid_lenient = false;
};

// Parses a training verbalizer document
//   {"class": {"lang": ["word", ...], ...}, ...}
// and checks every word against the tokenizer without throwing on label
// problems. Throws InvalidVerbalizer only when the JSON itself is malformed.
VerbalizerCheck check_training_verbalizer(std::string_view json_text,
                                          const EmbeddingTable& table,
                                          const Tokenizer& tokenizer);

// Throws InvalidLabelToken (strict mode, a word that is not exactly one known
// token), AmbiguousVerbalizer, EmptyVerbalizer or DegenerateSmoothing.
// In lenient mode offending words are dropped and reported via `warnings`.
TrainingVerbalizer parse_training_verbalizer(std::string_view json_text,
                                             const EmbeddingTable& table,
                                             const Tokenizer& tokenizer,
                                             LabelStrictness strictness = LabelStrictness::Strict,
                                             std::vector<VerbalizerDiagnostic>* warnings = nullptr);

TrainingVerbalizer load_training_verbalizer(const std::filesystem::path& path,
                                            const EmbeddingTable& table,
                                            const Tokenizer& tokenizer,
                                            LabelStrictness strictness = LabelStrictness::Strict,
                                            std::vector<VerbalizerDiagnostic>* warnings = nullptr);

// Inference labels document: {"class": "word", ...}, document order kept.
using ClassLabels = std::vector<std::pair<std::string, std::string>>;
ClassLabels parse_class_labels(std::string_view json_text);
ClassLabels load_class_labels(const std::filesystem::path& path);

struct WeightedToken {
  TokenId id = 0;
  float similarity = 0.0f;
  double weight = 0.0;
};

// Automatically built embedding-neighborhood verbalizer. Every neighborhood
// has exactly k entries whose weights are positive and sum to 1.
struct InferenceVerbalizer {
  std::vector<std::string> classes;
  std::vector<std::vector<WeightedToken>> neighborhoods;  // parallel to classes
  std::size_t k = 0;
};

// Softmax over similarities. The max is subtracted first, so adding a
// constant to every input leaves the result unchanged.
std::vector<double> compute_weights(std::span<const double> similarities);
std::vector<double> compute_weights(std::span<const Neighbor> neighborhood);

InferenceVerbalizer build_inference_verbalizer(const ClassLabels& class_labels,
                                               const EmbeddingTable& table,
                                               const Tokenizer& tokenizer,
                                               std::size_t k);

}  // namespace rosprompt
