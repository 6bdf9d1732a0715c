#include "rosprompt/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rosprompt/error.hpp"

namespace rosprompt {

namespace {

struct PooledMeans {
  double others = 0.0;
  double truth = 0.0;
  std::size_t others_count = 0;
  std::size_t truth_count = 0;
};

PooledMeans pooled_means(std::span<const double> probs,
                         const TrainingVerbalizer& verbalizer,
                         std::size_t true_class) {
  if (verbalizer.num_classes() < 2) {
    throw Error(ErrorCode::PenaltyUndefined,
                "penalty needs at least two classes");
  }
  if (true_class >= verbalizer.num_classes()) {
    throw Error(ErrorCode::UnknownClass,
                "class index " + std::to_string(true_class) + " out of range");
  }
  PooledMeans m;
  for (std::size_t c = 0; c < verbalizer.num_classes(); ++c) {
    for (TokenId id : verbalizer.token_sets[c]) {
      const double p = probs[static_cast<std::size_t>(id)];
      if (c == true_class) {
        m.truth += p;
        ++m.truth_count;
      } else {
        m.others += p;
        ++m.others_count;
      }
    }
  }
  m.others /= static_cast<double>(m.others_count);
  m.truth /= static_cast<double>(m.truth_count);
  return m;
}

void check_sizes(const PredictedDistribution& p, const TargetDistribution& y) {
  if (p.probs.size() != y.probs.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "predicted and target distributions differ in size");
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "epsilon must lie in [0, 1)");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidConfig, "alpha must be a finite value >= 0");
  }
}

PredictedDistribution softmax(std::span<const double> logits) {
  PredictedDistribution out;
  out.probs.resize(logits.size());
  if (logits.empty()) return out;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - hi);
    total += out.probs[i];
  }
  for (double& p : out.probs) p /= total;
  return out;
}

TargetDistribution smooth_targets(const TrainingVerbalizer& verbalizer,
                                  std::size_t true_class, double epsilon,
                                  std::size_t vocab_size) {
  if (true_class >= verbalizer.num_classes()) {
    throw Error(ErrorCode::UnknownClass,
                "class index " + std::to_string(true_class) + " out of range");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "epsilon must lie in [0, 1)");
  }
  const std::size_t labelled = verbalizer.total_tokens();
  if (vocab_size <= labelled) {
    throw Error(ErrorCode::DegenerateSmoothing,
                "vocabulary size must exceed the number of label tokens");
  }
  TargetDistribution y;
  y.true_class = true_class;
  y.probs.assign(vocab_size,
                 epsilon / static_cast<double>(vocab_size - labelled));
  for (std::size_t c = 0; c < verbalizer.num_classes(); ++c) {
    const auto& set = verbalizer.token_sets[c];
    const double value =
        c == true_class ? (1.0 - epsilon) / static_cast<double>(set.size()) : 0.0;
    for (TokenId id : set) y.probs.at(static_cast<std::size_t>(id)) = value;
  }
  return y;
}

double cross_entropy(const PredictedDistribution& predicted,
                     const TargetDistribution& target) {
  check_sizes(predicted, target);
  double ce = 0.0;
  for (std::size_t t = 0; t < target.probs.size(); ++t) {
    const double y = target.probs[t];
    if (y == 0.0) continue;
    const double p = predicted.probs[t];
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::NumericalUnderflow,
                  "invalid predicted probability at token " + std::to_string(t));
    }
    ce -= y * std::log(std::max(p, kLogFloor));
  }
  return ce;
}

double penalty_omega(const PredictedDistribution& predicted,
                     const TrainingVerbalizer& verbalizer, std::size_t true_class) {
  const auto m = pooled_means(predicted.probs, verbalizer, true_class);
  if (!(m.truth > 0.0)) {
    throw Error(ErrorCode::NumericalUnderflow,
                "true-class probability mass underflowed to zero");
  }
  return m.others / m.truth;
}

LossValue rosprompt_loss(const PredictedDistribution& predicted,
                         const TargetDistribution& target,
                         const TrainingVerbalizer& verbalizer,
                         const LossConfig& config) {
  LossValue v;
  v.ce = cross_entropy(predicted, target);
  v.omega = penalty_omega(predicted, verbalizer, target.true_class);
  v.total = v.ce + config.alpha * v.omega;
  return v;
}

std::vector<double> loss_gradient_probs(const PredictedDistribution& predicted,
                                        const TargetDistribution& target,
                                        const TrainingVerbalizer& verbalizer,
                                        const LossConfig& config) {
  check_sizes(predicted, target);
  const auto& p = predicted.probs;
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double y = target.probs[t];
    if (y != 0.0 && p[t] >= kLogFloor) g[t] = -y / p[t];
  }
  if (config.alpha != 0.0) {
    const auto m = pooled_means(p, verbalizer, target.true_class);
    // omega = others / truth
    const double d_other = config.alpha / (static_cast<double>(m.others_count) * m.truth);
    const double d_true = -config.alpha * m.others /
                          (m.truth * m.truth * static_cast<double>(m.truth_count));
    for (std::size_t c = 0; c < verbalizer.num_classes(); ++c) {
      const double d = c == target.true_class ? d_true : d_other;
      for (TokenId id : verbalizer.token_sets[c]) g[static_cast<std::size_t>(id)] += d;
    }
  }
  return g;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_probs) {
  double inner = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) inner += probs[t] * grad_probs[t];
  std::vector<double> dz(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    dz[j] = probs[j] * grad_probs[j] - probs[j] * inner;
  }
  return dz;
}

std::vector<double> loss_gradient_logits(const PredictedDistribution& predicted,
                                         const TargetDistribution& target,
                                         const TrainingVerbalizer& verbalizer,
                                         const LossConfig& config) {
  const auto g = loss_gradient_probs(predicted, target, verbalizer, config);
  return softmax_backward(predicted.probs, g);
}

}  // namespace rosprompt
