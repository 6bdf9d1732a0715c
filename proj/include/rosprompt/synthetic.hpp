#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "rosprompt/corpus.hpp"
#include "rosprompt/verbalizer.hpp"
#include "rosprompt/vocab_embed.hpp"

namespace rosprompt {

// Parameters of a seeded topic-classification task for the toy backend.
//
// Each class owns a random unit direction. Its English label and two
// translated labels sit close to that direction, and `topic_words` further
// tokens sit around it with more spread. The seven words of the default init
// text share a common offset of length `prompt_bias` along the first class's
// direction, so an untrained text-initialized prompt leans toward that class.
// Remaining vocabulary slots are filler tokens with random directions.
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t vocab_size = 50;
  std::size_t dim = 16;
  std::size_t topic_words = 8;
  std::size_t doc_topic_tokens = 4;
  std::size_t doc_filler_tokens = 2;
  std::size_t train_per_class = 16;
  std::size_t test_per_class = 40;
  double label_noise = 0.15;
  double topic_noise = 0.6;
  double prompt_bias = 1.5;
};

struct SyntheticTask {
  std::shared_ptr<const EmbeddingTable> table;
  std::string verbalizer_json;  // {"class": {"en": [...], "de": [...], "es": [...]}}
  ClassLabels labels;           // English label per class
  LabeledCorpus train;          // English documents
  LabeledCorpus test;           // documents tagged "en" and "xx"
};

// Supports up to 8 classes. Throws InvalidArgument when vocab_size cannot
// hold the generated tokens.
SyntheticTask make_synthetic_task(const SyntheticSpec& spec, std::uint64_t seed);

// Writes embeddings.txt, verbalizer.json, labels.json, train.jsonl, test.jsonl
// and a config.json that points at them with relative paths.
void write_synthetic_task(const SyntheticTask& task, const std::filesystem::path& dir);

}  // namespace rosprompt
