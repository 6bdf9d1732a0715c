#include "rosprompt/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "rosprompt/error.hpp"
#include "rosprompt/rng.hpp"

namespace rosprompt {

namespace {

struct ClassWords {
  const char* en;
  const char* de;
  const char* es;
};

constexpr std::array<ClassWords, 8> kClassWords = {{
    {"sports", "Sport", "deporte"},
    {"politics", "Politik", "politica"},
    {"science", "Wissenschaft", "ciencia"},
    {"music", "Musik", "musica"},
    {"travel", "Reise", "viaje"},
    {"health", "Gesundheit", "salud"},
    {"technology", "Technik", "tecnologia"},
    {"entertainment", "Unterhaltung", "entretenimiento"},
}};

constexpr std::array<const char*, 7> kPromptWords = {"In",    "this", "sentence,", "the",
                                                    "topic", "is",   "about"};

std::vector<double> gaussian(Rng& rng, std::size_t dim, double scale) {
  std::vector<double> v(dim);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

}  // namespace

SyntheticTask make_synthetic_task(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2 || spec.classes > kClassWords.size()) {
    throw Error(ErrorCode::InvalidArgument, "synthetic task supports 2..8 classes");
  }
  if (spec.classes > spec.dim) {
    throw Error(ErrorCode::InvalidArgument, "synthetic task needs dim >= classes");
  }
  const std::size_t fixed = spec.classes * (3 + spec.topic_words) + kPromptWords.size();
  if (spec.vocab_size <= fixed) {
    throw Error(ErrorCode::InvalidArgument,
                "vocab_size must exceed " + std::to_string(fixed) + " for this spec");
  }
  const std::size_t fillers = spec.vocab_size - fixed;
  Rng rng(seed, "synthetic-task");
  const std::size_t d = spec.dim;

  // Orthonormal class directions via Gram-Schmidt.
  std::vector<std::vector<double>> centers;
  while (centers.size() < spec.classes) {
    auto v = gaussian(rng, d, 1.0);
    for (const auto& c : centers) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += v[j] * c[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * c[j];
    }
    normalize(v);
    centers.push_back(std::move(v));
  }

  std::vector<std::string> surfaces;
  std::vector<float> vectors;
  auto add = [&](std::string s, const std::vector<double>& base, double noise) {
    const auto n = gaussian(rng, d, noise / std::sqrt(static_cast<double>(d)));
    for (std::size_t j = 0; j < d; ++j) vectors.push_back(static_cast<float>(base[j] + n[j]));
    surfaces.push_back(std::move(s));
  };

  SyntheticTask task;
  nlohmann::ordered_json verb = nlohmann::ordered_json::object();
  std::vector<std::vector<std::string>> topic(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const auto& w = kClassWords[c];
    add(w.en, centers[c], spec.label_noise);
    add(w.de, centers[c], spec.label_noise);
    add(w.es, centers[c], spec.label_noise);
    verb[w.en] = {{"en", {w.en}}, {"de", {w.de}}, {"es", {w.es}}};
    task.labels.emplace_back(w.en, w.en);
    for (std::size_t t = 0; t < spec.topic_words; ++t) {
      topic[c].push_back(std::string(w.en) + "_" + std::to_string(t));
      add(topic[c].back(), centers[c], spec.topic_noise);
    }
  }
  auto bias = centers[0];
  for (double& x : bias) x *= spec.prompt_bias;
  for (const char* p : kPromptWords) {
    auto base = gaussian(rng, d, 0.5 / std::sqrt(static_cast<double>(d)));
    for (std::size_t j = 0; j < d; ++j) base[j] += bias[j];
    add(p, base, 0.0);
  }
  std::vector<std::string> filler;
  for (std::size_t f = 0; f < fillers; ++f) {
    filler.push_back("w" + std::to_string(f));
    auto base = gaussian(rng, d, 1.0);
    normalize(base);
    add(filler.back(), base, 0.0);
  }
  task.table = std::make_shared<const EmbeddingTable>(std::move(surfaces), std::move(vectors), d);
  task.verbalizer_json = verb.dump(2);

  auto make_doc = [&](std::size_t c) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < spec.doc_topic_tokens; ++i) {
      words.push_back(topic[c][rng.index(topic[c].size())]);
    }
    for (std::size_t i = 0; i < spec.doc_filler_tokens && !filler.empty(); ++i) {
      words.push_back(filler[rng.index(filler.size())]);
    }
    rng.shuffle(std::span<std::string>(words));
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    return text;
  };

  for (const auto& [name, label] : task.labels) {
    task.train.classes.push_back(name);
    task.test.classes.push_back(name);
  }
  task.train.split = "train";
  task.test.split = "test";
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.train_per_class; ++i) {
      task.train.examples.push_back({"train-" + std::to_string(c) + "-" + std::to_string(i),
                                     make_doc(c), kClassWords[c].en, "en"});
    }
    for (std::size_t i = 0; i < spec.test_per_class; ++i) {
      task.test.examples.push_back({"test-" + std::to_string(c) + "-" + std::to_string(i),
                                    make_doc(c), kClassWords[c].en, i % 2 ? "xx" : "en"});
    }
  }
  return task;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::string corpus_jsonl(const LabeledCorpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples) {
    out += nlohmann::ordered_json{
        {"id", ex.id}, {"text", ex.text}, {"label", ex.label}, {"lang", ex.language}}
               .dump() +
           "\n";
  }
  return out;
}

}  // namespace

void write_synthetic_task(const SyntheticTask& task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_embeddings_text(*task.table, dir / "embeddings.txt");
  write_file(dir / "verbalizer.json", task.verbalizer_json + "\n");
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [name, word] : task.labels) labels[name] = word;
  write_file(dir / "labels.json", labels.dump(2) + "\n");
  write_file(dir / "train.jsonl", corpus_jsonl(task.train));
  write_file(dir / "test.jsonl", corpus_jsonl(task.test));

  const nlohmann::ordered_json config = {
      {"backend", {{"kind", "decoder-only"}, {"embeddings", "embeddings.txt"}}},
      {"verbalizer", "verbalizer.json"},
      {"train_corpus", "train.jsonl"},
      {"train", {{"learning_rate", 0.03}, {"epsilon", 0.1}, {"alpha", 1.0}}},
      {"inference", {{"labels", "labels.json"}, {"k", 3}}},
      {"eval", {{{"name", "toy"}, {"corpus", "test.jsonl"}}}},
      {"gzsl", {{"test_corpus", "test.jsonl"}}},
      {"sweep", {{"dev_corpus", "test.jsonl"}}},
  };
  write_file(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace rosprompt
