#include "rosprompt/inference.hpp"

#include <algorithm>

#include "rosprompt/error.hpp"
#include "rosprompt/objective.hpp"

namespace rosprompt {

std::string_view aggregate_name(AggregateOn on) noexcept {
  return on == AggregateOn::Logits ? "logits" : "probs";
}

AggregateOn parse_aggregate_on(std::string_view name) {
  if (name == "logits") return AggregateOn::Logits;
  if (name == "probs") return AggregateOn::Probs;
  throw Error(ErrorCode::InvalidConfig,
              "aggregate_on must be 'logits' or 'probs', got '" + std::string(name) + "'");
}

ClassScores aggregate_scores(std::span<const double> values,
                             const InferenceVerbalizer& verbalizer) {
  ClassScores out;
  out.classes = verbalizer.classes;
  out.scores.reserve(verbalizer.classes.size());
  for (const auto& hood : verbalizer.neighborhoods) {
    double q = 0.0;
    for (const auto& t : hood) {
      if (t.id < 0 || static_cast<std::size_t>(t.id) >= values.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "verbalizer token " + std::to_string(t.id) + " outside logit vector");
      }
      q += t.weight * values[static_cast<std::size_t>(t.id)];
    }
    out.scores.push_back(q);
  }
  return out;
}

std::size_t predict(const ClassScores& scores) {
  if (scores.scores.empty()) {
    throw Error(ErrorCode::EmptyVerbalizer, "no classes to predict from");
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.scores.size(); ++c) {
    if (scores.scores[c] > scores.scores[best]) best = c;
  }
  return best;
}

Classification classify(std::string_view text, const SoftPrompt& prompt,
                        const InferenceVerbalizer& verbalizer, const Backend& backend,
                        AggregateOn on) {
  const auto tokens = backend.tokenize(text);
  if (tokens.empty()) {
    throw Error(ErrorCode::MalformedRecord, "document has no tokens");
  }
  const ScoringRequest req{tokens, prompt, default_position(backend.descriptor().kind)};
  const auto logits = backend.score(req);
  Classification out;
  if (on == AggregateOn::Probs) {
    out.scores = aggregate_scores(softmax(logits.logits).probs, verbalizer);
  } else {
    out.scores = aggregate_scores(logits.logits, verbalizer);
  }
  out.class_index = predict(out.scores);
  return out;
}

std::vector<Classification> classify_all(std::span<const std::string> texts,
                                         const SoftPrompt& prompt,
                                         const InferenceVerbalizer& verbalizer,
                                         const Backend& backend, AggregateOn on) {
  std::vector<Classification> out(texts.size());
  std::vector<std::exception_ptr> errors(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i) {
    try {
      out[i] = classify(texts[i], prompt, verbalizer, backend, on);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

KSweepResult sweep_k(std::span<const std::size_t> k_candidates,
                     std::span<const std::pair<std::string, LabeledCorpus>> dev_sets,
                     const SoftPrompt& prompt, const Backend& backend,
                     const ClassLabels& class_labels, AggregateOn on) {
  if (k_candidates.empty()) throw Error(ErrorCode::InvalidConfig, "no k candidates");
  if (dev_sets.empty()) throw Error(ErrorCode::InvalidConfig, "no dev sets");

  std::vector<std::size_t> ks(k_candidates.begin(), k_candidates.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  KSweepResult result;
  for (std::size_t k : ks) {
    const auto verbalizer =
        build_inference_verbalizer(class_labels, backend.embeddings(), backend.tokenizer(), k);
    KScore score{k, 0.0, {}};
    for (const auto& [language, corpus] : dev_sets) {
      if (corpus.examples.empty()) {
        throw Error(ErrorCode::InvalidConfig, "dev set '" + language + "' is empty");
      }
      std::vector<std::string> texts;
      texts.reserve(corpus.size());
      for (const auto& ex : corpus.examples) texts.push_back(ex.text);
      const auto preds = classify_all(texts, prompt, verbalizer, backend, on);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].label() == corpus.examples[i].label) ++correct;
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(preds.size());
      score.accuracy_by_language.emplace_back(language, acc);
      score.mean_accuracy += acc;
    }
    score.mean_accuracy /= static_cast<double>(dev_sets.size());
    result.scores.push_back(std::move(score));
  }
  // Ascending scan with strict improvement keeps the smallest k on ties.
  const KScore* best = &result.scores.front();
  for (const auto& s : result.scores) {
    if (s.mean_accuracy > best->mean_accuracy) best = &s;
  }
  result.chosen_k = best->k;
  return result;
}

}  // namespace rosprompt
