#include "rosprompt/verbalizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "rosprompt/error.hpp"

namespace rosprompt {

namespace {

using json = nlohmann::ordered_json;
using Kind = VerbalizerDiagnostic::Kind;

std::string read_file(const std::filesystem::path& path, ErrorCode code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(code, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, ErrorCode code) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(code, std::string("malformed JSON: ") + e.what());
  }
}

struct Built {
  TrainingVerbalizer verbalizer;
  VerbalizerCheck check;
};

Built build(std::string_view json_text, const EmbeddingTable& table,
            const Tokenizer& tokenizer) {
  const json doc = parse_json(json_text, ErrorCode::InvalidVerbalizer);
  if (!doc.is_object() || doc.empty()) {
    throw Error(ErrorCode::InvalidVerbalizer,
                "verbalizer document must be a non-empty object of classes");
  }
  Built out;
  auto& v = out.verbalizer;
  auto& diags = out.check.diagnostics;
  std::unordered_map<TokenId, std::size_t> owner;

  for (const auto& [class_name, by_lang] : doc.items()) {
    if (!by_lang.is_object()) {
      throw Error(ErrorCode::InvalidVerbalizer,
                  "class '" + class_name + "' must map languages to word lists");
    }
    const std::size_t ci = v.classes.size();
    v.classes.push_back(class_name);
    v.token_sets.emplace_back();
    v.source_labels.emplace_back();
    auto& set = v.token_sets.back();

    for (const auto& [lang, words] : by_lang.items()) {
      if (!words.is_array()) {
        throw Error(ErrorCode::InvalidVerbalizer,
                    "class '" + class_name + "', language '" + lang +
                        "' must be an array of words");
      }
      std::vector<std::string> surfaces;
      for (const auto& w : words) {
        if (!w.is_string()) {
          throw Error(ErrorCode::InvalidVerbalizer,
                      "class '" + class_name + "' has a non-string label");
        }
        const std::string word = w.get<std::string>();
        surfaces.push_back(word);
        const auto ids = tokenizer.tokenize(word);
        if (ids.size() != 1) {
          diags.push_back({Kind::MultiToken, class_name, lang, word,
                           "'" + word + "' tokenizes to " +
                               std::to_string(ids.size()) + " tokens"});
          continue;
        }
        const TokenId id = ids.front();
        if (id == kUnknownToken || id == tokenizer.unknown_id() ||
            !table.contains(id)) {
          diags.push_back({Kind::UnknownToken, class_name, lang, word,
                           "'" + word + "' is not a vocabulary token"});
          continue;
        }
        ++out.check.accepted_words;
        auto [it, inserted] = owner.emplace(id, ci);
        if (!inserted && it->second != ci) {
          diags.push_back({Kind::Overlap, class_name, lang, word,
                           "'" + word + "' is also a label of class '" +
                               v.classes[it->second] + "'"});
          continue;
        }
        if (std::find(set.begin(), set.end(), id) == set.end()) set.push_back(id);
      }
      v.source_labels.back().emplace_back(lang, std::move(surfaces));
    }
  }

  for (std::size_t c = 0; c < v.classes.size(); ++c) {
    if (v.token_sets[c].empty()) {
      diags.push_back({Kind::EmptyClass, v.classes[c], "", "",
                       "class '" + v.classes[c] + "' has no usable label tokens"});
    }
  }
  if (v.total_tokens() >= table.vocab_size()) {
    diags.push_back({Kind::TooManyTokens, "", "", "",
                     "label tokens must be fewer than the vocabulary size"});
  }

  const bool structural = std::any_of(diags.begin(), diags.end(), [](const auto& d) {
    return d.kind == Kind::Overlap || d.kind == Kind::EmptyClass ||
           d.kind == Kind::TooManyTokens;
  });
  out.check.valid_lenient = !structural;
  out.check.valid_strict = diags.empty();
  return out;
}

ErrorCode error_for(Kind kind) {
  switch (kind) {
    case Kind::MultiToken:
    case Kind::UnknownToken: return ErrorCode::InvalidLabelToken;
    case Kind::Overlap: return ErrorCode::AmbiguousVerbalizer;
    case Kind::EmptyClass: return ErrorCode::EmptyVerbalizer;
    case Kind::TooManyTokens: return ErrorCode::DegenerateSmoothing;
  }
  return ErrorCode::InvalidVerbalizer;
}

}  // namespace

std::string_view kind_name(VerbalizerDiagnostic::Kind kind) noexcept {
  switch (kind) {
    case Kind::MultiToken: return "multi_token";
    case Kind::UnknownToken: return "unknown_token";
    case Kind::Overlap: return "overlap";
    case Kind::EmptyClass: return "empty_class";
    case Kind::TooManyTokens: return "too_many_tokens";
  }
  return "unknown";
}

std::size_t TrainingVerbalizer::class_index(std::string_view name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) {
    throw Error(ErrorCode::UnknownClass, "unknown class '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

std::size_t TrainingVerbalizer::total_tokens() const noexcept {
  std::size_t n = 0;
  for (const auto& s : token_sets) n += s.size();
  return n;
}

void TrainingVerbalizer::validate(std::size_t vocab_size) const {
  if (classes.empty() || classes.size() != token_sets.size()) {
    throw Error(ErrorCode::InvalidVerbalizer, "verbalizer has no classes");
  }
  std::unordered_set<TokenId> seen;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (token_sets[c].empty()) {
      throw Error(ErrorCode::EmptyVerbalizer,
                  "class '" + classes[c] + "' has no label tokens");
    }
    for (TokenId id : token_sets[c]) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        throw Error(ErrorCode::InvalidVerbalizer,
                    "label token id " + std::to_string(id) + " outside vocabulary");
      }
      if (!seen.insert(id).second) {
        throw Error(ErrorCode::AmbiguousVerbalizer,
                    "token id " + std::to_string(id) + " appears in more than one set");
      }
    }
  }
  if (total_tokens() >= vocab_size) {
    throw Error(ErrorCode::DegenerateSmoothing,
                "label tokens must be fewer than the vocabulary size");
  }
}

TrainingVerbalizer TrainingVerbalizer::restricted_to(
    std::span<const std::string> keep) const {
  TrainingVerbalizer out;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (std::find(keep.begin(), keep.end(), classes[c]) == keep.end()) continue;
    out.classes.push_back(classes[c]);
    out.token_sets.push_back(token_sets[c]);
    out.source_labels.push_back(
        c < source_labels.size() ? source_labels[c] : LanguageLabels{});
  }
  for (const auto& name : keep) class_index(name);
  return out;
}

TrainingVerbalizer TrainingVerbalizer::single_language(
    const EmbeddingTable& table, const Tokenizer& tokenizer,
    std::string_view language) const {
  TrainingVerbalizer out;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const LanguageLabels empty;
    const auto& labels = c < source_labels.size() ? source_labels[c] : empty;
    auto it = std::find_if(labels.begin(), labels.end(), [&](const auto& entry) {
      return entry.first == language && !entry.second.empty();
    });
    if (it == labels.end()) {
      throw Error(ErrorCode::InvalidVerbalizer,
                  "class '" + classes[c] + "' has no '" + std::string(language) +
                      "' label");
    }
    const std::string& word = it->second.front();
    const auto ids = tokenizer.tokenize(word);
    if (ids.size() != 1 || ids.front() == kUnknownToken ||
        ids.front() == tokenizer.unknown_id()) {
      throw Error(ErrorCode::InvalidLabelToken,
                  "'" + word + "' is not a single vocabulary token");
    }
    out.classes.push_back(classes[c]);
    out.token_sets.push_back({ids.front()});
    out.source_labels.push_back({{std::string(language), {word}}});
  }
  out.validate(table.vocab_size());
  return out;
}

VerbalizerCheck check_training_verbalizer(std::string_view json_text,
                                          const EmbeddingTable& table,
                                          const Tokenizer& tokenizer) {
  return build(json_text, table, tokenizer).check;
}

TrainingVerbalizer parse_training_verbalizer(std::string_view json_text,
                                             const EmbeddingTable& table,
                                             const Tokenizer& tokenizer,
                                             LabelStrictness strictness,
                                             std::vector<VerbalizerDiagnostic>* warnings) {
  Built built = build(json_text, table, tokenizer);
  for (const auto& d : built.check.diagnostics) {
    const bool word_level = d.kind == Kind::MultiToken || d.kind == Kind::UnknownToken;
    if (strictness == LabelStrictness::Lenient && word_level) {
      if (warnings) warnings->push_back(d);
      continue;
    }
    throw Error(error_for(d.kind), d.message);
  }
  built.verbalizer.validate(table.vocab_size());
  return std::move(built.verbalizer);
}

TrainingVerbalizer load_training_verbalizer(const std::filesystem::path& path,
                                            const EmbeddingTable& table,
                                            const Tokenizer& tokenizer,
                                            LabelStrictness strictness,
                                            std::vector<VerbalizerDiagnostic>* warnings) {
  return parse_training_verbalizer(read_file(path, ErrorCode::InvalidVerbalizer),
                                   table, tokenizer, strictness, warnings);
}

ClassLabels parse_class_labels(std::string_view json_text) {
  const json doc = parse_json(json_text, ErrorCode::InvalidVerbalizer);
  if (!doc.is_object() || doc.empty()) {
    throw Error(ErrorCode::InvalidVerbalizer,
                "class labels must be a non-empty object {class: word}");
  }
  ClassLabels out;
  for (const auto& [name, word] : doc.items()) {
    if (!word.is_string() || word.get<std::string>().empty()) {
      throw Error(ErrorCode::InvalidVerbalizer,
                  "label for class '" + name + "' must be a non-empty string");
    }
    out.emplace_back(name, word.get<std::string>());
  }
  return out;
}

ClassLabels load_class_labels(const std::filesystem::path& path) {
  return parse_class_labels(read_file(path, ErrorCode::InvalidVerbalizer));
}

std::vector<double> compute_weights(std::span<const double> similarities) {
  if (similarities.empty()) {
    throw Error(ErrorCode::InvalidNeighborhood, "empty neighborhood");
  }
  const double hi = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> w(similarities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(similarities[i] - hi);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> compute_weights(std::span<const Neighbor> neighborhood) {
  std::vector<double> sims;
  sims.reserve(neighborhood.size());
  for (const auto& n : neighborhood) sims.push_back(n.similarity);
  return compute_weights(sims);
}

InferenceVerbalizer build_inference_verbalizer(const ClassLabels& class_labels,
                                               const EmbeddingTable& table,
                                               const Tokenizer& tokenizer,
                                               std::size_t k) {
  if (class_labels.empty()) {
    throw Error(ErrorCode::EmptyVerbalizer, "no inference classes");
  }
  InferenceVerbalizer out;
  out.k = k;
  for (const auto& [name, label] : class_labels) {
    const auto anchor = embed_surface(label, table, tokenizer);
    const auto neighbors = top_k_neighbors(table, anchor, k);
    const auto weights = compute_weights(neighbors);
    std::vector<WeightedToken> hood;
    hood.reserve(k);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      hood.push_back({neighbors[i].id, neighbors[i].similarity, weights[i]});
    }
    out.classes.push_back(name);
    out.neighborhoods.push_back(std::move(hood));
  }
  return out;
}

}  // namespace rosprompt
