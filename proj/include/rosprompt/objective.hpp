#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rosprompt/verbalizer.hpp"

namespace rosprompt {

// Smoothing mass epsilon in [0, 1) and penalty coefficient alpha >= 0.
struct LossConfig {
  double epsilon = 0.1;
  double alpha = 10.0;

  void validate() const;
};

// Smoothed target over the full vocabulary for one sample.
struct TargetDistribution {
  std::vector<double> probs;
  std::size_t true_class = 0;
};

// Softmax-normalized model output over the full vocabulary.
struct PredictedDistribution {
  std::vector<double> probs;
};

// Max-shifted softmax in double precision.
PredictedDistribution softmax(std::span<const double> logits);

// Contrastive label smoothing: 1-eps spread uniformly over the true class's
// tokens, eps spread uniformly over tokens outside every label set, and exact
// zeros on the other classes' label tokens.
//
// Throws UnknownClass, DegenerateSmoothing (|V| <= total label tokens) or
// InvalidConfig (eps outside [0, 1)).
TargetDistribution smooth_targets(const TrainingVerbalizer& verbalizer,
                                  std::size_t true_class, double epsilon,
                                  std::size_t vocab_size);

// Probabilities below this floor are clamped inside log(), and their
// gradient contribution is zeroed.
inline constexpr double kLogFloor = 1e-12;

// -sum_t y_t log(max(yhat_t, floor)). Throws NumericalUnderflow on a
// negative or non-finite probability at a position the target supports.
double cross_entropy(const PredictedDistribution& predicted,
                     const TargetDistribution& target);

// Ratio of the pooled mean predicted probability over every other class's
// label tokens to the mean over the true class's tokens. Throws
// PenaltyUndefined for a single-class verbalizer.
double penalty_omega(const PredictedDistribution& predicted,
                     const TrainingVerbalizer& verbalizer, std::size_t true_class);

struct LossValue {
  double total = 0.0;
  double ce = 0.0;
  double omega = 0.0;
};

// total = ce + alpha * omega.
LossValue rosprompt_loss(const PredictedDistribution& predicted,
                         const TargetDistribution& target,
                         const TrainingVerbalizer& verbalizer,
                         const LossConfig& config);

// d total / d yhat.
std::vector<double> loss_gradient_probs(const PredictedDistribution& predicted,
                                        const TargetDistribution& target,
                                        const TrainingVerbalizer& verbalizer,
                                        const LossConfig& config);

// Pulls a probability-space gradient back through the softmax:
//   dz_j = p_j * (g_j - sum_t p_t g_t)
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_probs);

// d total / d logits, where predicted = softmax(logits).
std::vector<double> loss_gradient_logits(const PredictedDistribution& predicted,
                                         const TargetDistribution& target,
                                         const TrainingVerbalizer& verbalizer,
                                         const LossConfig& config);

}  // namespace rosprompt
