#include "rosprompt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "rosprompt/rng.hpp"

namespace rosprompt {

namespace {

struct PreparedSample {
  const FewShotSample* source = nullptr;
  std::vector<TokenId> tokens;
  std::size_t class_index = 0;
};

struct SampleOutcome {
  LossValue loss;
  PromptGradient grad;
};

class AdamW {
 public:
  AdamW(const OptimizerConfig& cfg, double lr, std::size_t size)
      : cfg_(cfg), lr_(lr), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<float> params, std::span<const double> grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      double p = params[i];
      p -= lr_ * cfg_.weight_decay * p;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      p -= lr_ * mhat / (std::sqrt(vhat) + cfg_.eps);
      params[i] = static_cast<float>(p);
    }
  }

 private:
  OptimizerConfig cfg_;
  double lr_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

SampleOutcome evaluate_sample(const PreparedSample& s, const TargetDistribution& target,
                              const TrainConfig& config,
                              const TrainingVerbalizer& verbalizer,
                              const Backend& backend, const SoftPrompt& prompt) {
  const ScoringRequest req{s.tokens, prompt,
                           default_position(backend.descriptor().kind)};
  const auto logits = backend.score(req);
  const auto probs = softmax(logits.logits);
  SampleOutcome out;
  out.loss = rosprompt_loss(probs, target, verbalizer, config.loss);
  const auto dz = loss_gradient_logits(probs, target, verbalizer, config.loss);
  out.grad = backend.grad_prompt(req, dz);
  return out;
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1 || shots_per_class < 1 || prompt_length < 1) {
    throw Error(ErrorCode::InvalidConfig,
                "batch_size, shots_per_class and prompt_length must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.eps > 0.0) ||
      !(optimizer.weight_decay >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid optimizer settings");
  }
  if (!(max_grad_norm >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "max_grad_norm must be >= 0");
  }
  loss.validate();
}

SoftPrompt init_prompt_from_text(std::string_view text, const Backend& backend) {
  const auto& table = backend.embeddings();
  const TokenId unk = backend.tokenizer().unknown_id();
  SoftPrompt p;
  p.dim = table.dim();
  p.init_source = std::string(text);
  for (TokenId id : backend.tokenize(text)) {
    if (id == kUnknownToken || id == unk) continue;
    auto r = table.row(id);
    p.values.insert(p.values.end(), r.begin(), r.end());
  }
  if (p.values.empty()) {
    throw Error(ErrorCode::UnknownSurface,
                "prompt text '" + std::string(text) + "' has no known tokens");
  }
  return p;
}

SoftPrompt random_prompt(std::size_t length, std::size_t dim, std::uint64_t seed,
                         double scale) {
  if (length == 0 || dim == 0) {
    throw Error(ErrorCode::InvalidConfig, "random prompt needs length and dim >= 1");
  }
  Rng rng(seed, "prompt-init");
  SoftPrompt p;
  p.dim = dim;
  p.values.resize(length * dim);
  for (float& v : p.values) v = static_cast<float>(scale * rng.normal());
  return p;
}

std::vector<FewShotSample> sample_few_shot(const LabeledCorpus& corpus,
                                           std::size_t shots, std::uint64_t seed,
                                           std::span<const std::string> classes) {
  if (shots == 0) throw Error(ErrorCode::InvalidConfig, "shots must be >= 1");
  std::vector<std::string> wanted(classes.begin(), classes.end());
  if (wanted.empty()) wanted = corpus.classes;

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    by_class[corpus.examples[i].label].push_back(i);
  }
  std::vector<FewShotSample> out;
  out.reserve(shots * wanted.size());
  for (std::size_t c = 0; c < wanted.size(); ++c) {
    auto& pool = by_class[wanted[c]];
    if (pool.size() < shots) {
      throw Error(ErrorCode::NotEnoughShots,
                  "class '" + wanted[c] + "' has " + std::to_string(pool.size()) +
                      " examples, " + std::to_string(shots) + " requested");
    }
    Rng rng(seed, "few-shot/" + wanted[c]);
    rng.shuffle(std::span<std::size_t>(pool));
    for (std::size_t i = 0; i < shots; ++i) {
      const auto& ex = corpus.examples[pool[i]];
      out.push_back({ex.id, ex.text, ex.label, ex.language});
    }
  }
  Rng order(seed, "few-shot-order");
  order.shuffle(std::span<FewShotSample>(out));
  return out;
}

TrainResult train(const TrainConfig& config, std::span<const FewShotSample> samples,
                  const TrainingVerbalizer& verbalizer, const Backend& backend,
                  const SoftPrompt& initial, const BatchObserver& observer) {
  config.validate();
  const auto& desc = backend.descriptor();
  verbalizer.validate(desc.vocab_size);
  if (verbalizer.num_classes() < 2) {
    throw Error(ErrorCode::PenaltyUndefined,
                "training needs a verbalizer with at least two classes");
  }
  initial.validate(desc.dim);
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no training samples");

  std::vector<PreparedSample> prepared;
  prepared.reserve(samples.size());
  std::vector<bool> covered(verbalizer.num_classes(), false);
  for (const auto& s : samples) {
    PreparedSample p{&s, backend.tokenize(s.text), verbalizer.class_index(s.label)};
    if (p.tokens.empty()) {
      throw Error(ErrorCode::MalformedRecord, "sample '" + s.id + "' has no tokens");
    }
    covered[p.class_index] = true;
    prepared.push_back(std::move(p));
  }
  if (std::count(covered.begin(), covered.end(), true) < 2) {
    throw Error(ErrorCode::InvalidArgument,
                "training samples must cover at least two classes");
  }
  std::vector<TargetDistribution> targets;
  for (std::size_t c = 0; c < verbalizer.num_classes(); ++c) {
    targets.push_back(
        smooth_targets(verbalizer, c, config.loss.epsilon, desc.vocab_size));
  }

  TrainResult result{initial, {}};
  SoftPrompt& prompt = result.prompt;
  AdamW optimizer(config.optimizer, config.learning_rate, prompt.values.size());

  const std::size_t n = prepared.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);
  std::vector<const FewShotSample*> batch_view;
  std::vector<SampleOutcome> outcomes;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(config.seed, "epoch-order", epoch);
    rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      if (config.max_steps != 0 && step >= config.max_steps) break;
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::size_t count = end - begin;

      batch_view.clear();
      for (std::size_t i = begin; i < end; ++i) batch_view.push_back(prepared[order[i]].source);
      if (observer) observer(step + 1, batch_view);

      outcomes.assign(count, {});
      bool failed = false;
#pragma omp parallel for schedule(static) if (count > 1)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        const auto& s = prepared[order[begin + static_cast<std::size_t>(i)]];
        try {
          outcomes[i] = evaluate_sample(s, targets[s.class_index], config,
                                        verbalizer, backend, prompt);
        } catch (...) {
#pragma omp atomic write
          failed = true;
        }
      }
      if (failed) {
        // Re-run serially so the original exception surfaces.
        for (std::size_t i = 0; i < count; ++i) {
          const auto& s = prepared[order[begin + i]];
          try {
            evaluate_sample(s, targets[s.class_index], config, verbalizer, backend, prompt);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NumericalUnderflow) throw;
            throw DivergenceError(std::string(e.what()) + " at step " +
                                      std::to_string(step + 1),
                                  prompt);
          }
        }
      }

      StepRecord rec;
      rec.step = step + 1;
      rec.epoch = epoch + 1;
      std::vector<double> grad(prompt.values.size(), 0.0);
      for (const auto& o : outcomes) {
        rec.ce += o.loss.ce;
        rec.omega += o.loss.omega;
        rec.total += o.loss.total;
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += o.grad.values[j];
      }
      const double inv = 1.0 / static_cast<double>(count);
      rec.ce *= inv;
      rec.omega *= inv;
      rec.total *= inv;
      for (double& g : grad) g *= inv;

      if (!std::isfinite(rec.total) || !all_finite(grad)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(rec.step),
                              prompt);
      }
      if (config.max_grad_norm > 0.0) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > config.max_grad_norm) {
          const double scale = config.max_grad_norm / norm;
          for (double& g : grad) g *= scale;
        }
      }
      optimizer.step(prompt.values, grad);
      ++step;
      ++prompt.trained_steps;
      result.log.push_back(rec);
    }
  }
  return result;
}

TrainResult train(const TrainConfig& config, std::span<const FewShotSample> samples,
                  const TrainingVerbalizer& verbalizer, const Backend& backend,
                  const BatchObserver& observer) {
  const SoftPrompt initial =
      config.init_text.empty()
          ? random_prompt(config.prompt_length, backend.descriptor().dim, config.seed)
          : init_prompt_from_text(config.init_text, backend);
  return train(config, samples, verbalizer, backend, initial, observer);
}

void write_training_log(std::span<const StepRecord> log,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["ce"] = r.ce;
    j["omega"] = r.omega;
    j["total"] = r.total;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace rosprompt
