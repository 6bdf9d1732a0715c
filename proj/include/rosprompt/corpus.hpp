#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rosprompt {

struct LabeledExample {
  std::string id;
  std::string text;
  std::string label;
  std::string language;
};

// Invariants: ids unique; every label in `classes`.
struct LabeledCorpus {
  std::vector<LabeledExample> examples;
  std::vector<std::string> classes;  // catalog, in first-seen or given order
  std::string split = "test";

  std::size_t size() const noexcept { return examples.size(); }

  // Examples whose language is in `languages` (all when empty).
  LabeledCorpus filter_languages(std::span<const std::string> languages) const;
  LabeledCorpus filter_classes(std::span<const std::string> keep) const;
  // Languages in first-seen order.
  std::vector<std::string> languages() const;
};

enum class CorpusFormat { Auto, JsonLines, Csv };

// Records carry "id", "text", "label" and "lang" (CSV: a header row naming
// those columns). With a catalog, labels outside it raise UnknownClass; without
// one the catalog is the labels in first-seen order. `require_label` false
// admits unlabeled records (for classification input).
//
// Throws MalformedRecord, UnknownClass, DuplicateId, or Io.
LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format,
                           const std::optional<std::vector<std::string>>& catalog = std::nullopt,
                           bool require_label = true);
LabeledCorpus load_corpus(const std::filesystem::path& path,
                          CorpusFormat format = CorpusFormat::Auto,
                          const std::optional<std::vector<std::string>>& catalog = std::nullopt,
                          bool require_label = true);

}  // namespace rosprompt
