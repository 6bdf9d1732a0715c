#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "rosprompt/error.hpp"
#include "rosprompt/objective.hpp"
#include "test_support.hpp"

using namespace rosprompt;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

// T_A = {t1, t2}, T_B = {t3} over a 10-token vocabulary (t0..t9).
TrainingVerbalizer two_class() {
  TrainingVerbalizer v;
  v.classes = {"A", "B"};
  v.token_sets = {{1, 2}, {3}};
  v.source_labels.resize(2);
  return v;
}

PredictedDistribution with_probs(std::vector<std::pair<int, double>> set, std::size_t vocab) {
  double used = 0.0;
  for (const auto& [id, p] : set) used += p;
  PredictedDistribution d;
  d.probs.assign(vocab, (1.0 - used) / static_cast<double>(vocab - set.size()));
  for (const auto& [id, p] : set) d.probs[id] = p;
  return d;
}

}  // namespace

TEST_CASE("smooth_targets golden values") {
  const auto v = two_class();
  const auto a = smooth_targets(v, 0, 0.2, 10);
  CHECK(a.probs[1] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(a.probs[2] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(a.probs[3] == 0.0);
  for (int t : {0, 4, 5, 6, 7, 8, 9}) CHECK(std::abs(a.probs[t] - 0.0285714) <= 1e-7);
  CHECK(std::accumulate(a.probs.begin(), a.probs.end(), 0.0) == doctest::Approx(1.0));

  const auto b = smooth_targets(v, 1, 0.2, 10);
  CHECK(b.probs[3] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(b.probs[1] == 0.0);
  CHECK(b.probs[2] == 0.0);
  CHECK(std::abs(b.probs[0] - 0.2 / 7) <= 1e-15);

  const auto hard = smooth_targets(v, 1, 0.0, 10);
  for (int t = 0; t < 10; ++t) CHECK(hard.probs[t] == (t == 3 ? 1.0 : 0.0));
}

TEST_CASE("smooth_targets errors") {
  const auto v = two_class();
  CHECK(code_of([&] { smooth_targets(v, 2, 0.1, 10); }) == ErrorCode::UnknownClass);
  CHECK(code_of([&] { smooth_targets(v, 0, 0.1, 3); }) == ErrorCode::DegenerateSmoothing);
  CHECK(code_of([&] { smooth_targets(v, 0, 1.0, 10); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { smooth_targets(v, 0, -0.1, 10); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("smooth_targets sums to one and vanishes on other classes") {
  Rng rng(17, "smooth-prop");
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t vocab = 3 + rng.index(60);
    const std::size_t classes = 1 + rng.index(std::min<std::size_t>(vocab - 1, 6));
    const auto v = testing::random_verbalizer(vocab, classes, rng);
    const std::size_t c = rng.index(classes);
    const double eps = rng.uniform() * 0.999;
    const auto y = smooth_targets(v, c, eps, vocab);
    CHECK(std::abs(std::accumulate(y.probs.begin(), y.probs.end(), 0.0) - 1.0) <= 1e-9);
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      for (TokenId id : v.token_sets[o]) CHECK(y.probs[id] == 0.0);
    }
    for (double p : y.probs) CHECK(p >= 0.0);
  }
}

TEST_CASE("cross entropy") {
  TargetDistribution one_hot{{0, 1, 0, 0}, 0};
  CHECK(std::abs(cross_entropy({{0.2, 0.5, 0.2, 0.1}}, one_hot) - 0.6931) <= 1e-4);
  CHECK(cross_entropy({{0, 1, 0, 0}}, one_hot) == 0.0);
  TargetDistribution uniform{{0.25, 0.25, 0.25, 0.25}, 0};
  CHECK(std::abs(cross_entropy({{0.25, 0.25, 0.25, 0.25}}, uniform) - 1.3863) <= 1e-4);

  // The floor keeps a zero prediction finite.
  CHECK(cross_entropy({{1, 0, 0, 0}}, one_hot) == doctest::Approx(-std::log(kLogFloor)));
  CHECK(code_of([&] { cross_entropy({{0.5, -0.1, 0.3, 0.3}}, one_hot); }) ==
        ErrorCode::NumericalUnderflow);
  CHECK(code_of([&] { cross_entropy({{0.5, NAN, 0.3, 0.2}}, one_hot); }) ==
        ErrorCode::NumericalUnderflow);
}

TEST_CASE("penalty golden values") {
  const auto v = two_class();
  CHECK(penalty_omega(with_probs({{1, 0.1}, {2, 0.1}, {3, 0.1}}, 10), v, 0) ==
        doctest::Approx(1.0));
  CHECK(penalty_omega(with_probs({{1, 0.3}, {2, 0.1}, {3, 0.2}}, 10), v, 0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(penalty_omega(with_probs({{1, 0.4}, {2, 0.2}, {3, 0.15}}, 10), v, 0) ==
        doctest::Approx(0.5).epsilon(1e-12));

  TrainingVerbalizer single;
  single.classes = {"A"};
  single.token_sets = {{1}};
  single.source_labels.resize(1);
  CHECK(code_of([&] { penalty_omega(with_probs({}, 10), single, 0); }) ==
        ErrorCode::PenaltyUndefined);
}

TEST_CASE("penalty uses the pooled mean over other-class tokens") {
  TrainingVerbalizer v;
  v.classes = {"A", "B", "C"};
  v.token_sets = {{0}, {1}, {2, 3, 4}};
  v.source_labels.resize(3);
  const auto p = with_probs({{0, 0.1}, {1, 0.4}, {2, 0.1}, {3, 0.1}, {4, 0.1}}, 8);
  // Pooled: (0.4 + 0.3) / 4 = 0.175, not the mean of class means (0.25).
  CHECK(penalty_omega(p, v, 0) == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("penalty monotonicity and permutation invariance") {
  const auto v = two_class();
  double prev = 1e300;
  for (double own : {0.05, 0.1, 0.2, 0.3}) {
    const double omega = penalty_omega(with_probs({{1, own}, {2, own}, {3, 0.1}}, 10), v, 0);
    CHECK(omega < prev);
    prev = omega;
  }
  prev = -1.0;
  for (double other : {0.05, 0.1, 0.2, 0.3}) {
    const double omega = penalty_omega(with_probs({{1, 0.2}, {2, 0.2}, {3, other}}, 10), v, 0);
    CHECK(omega > prev);
    prev = omega;
  }
  const auto p = with_probs({{1, 0.3}, {2, 0.05}, {3, 0.2}}, 10);
  auto swapped = p;
  std::swap(swapped.probs[1], swapped.probs[2]);
  CHECK(penalty_omega(p, v, 0) == penalty_omega(swapped, v, 0));
}

TEST_CASE("combined loss") {
  const auto v = two_class();
  const auto y = smooth_targets(v, 0, 0.2, 10);
  const auto p = with_probs({{1, 0.3}, {2, 0.1}, {3, 0.2}}, 10);
  const auto l0 = rosprompt_loss(p, y, v, {0.2, 0.0});
  CHECK(l0.total == l0.ce);
  const auto l100 = rosprompt_loss(p, y, v, {0.2, 100.0});
  CHECK(l100.total == doctest::Approx(l100.ce + 100.0).epsilon(1e-12));
  CHECK(l100.omega == doctest::Approx(1.0));

  // 0.6931 cross-entropy with Omega 0.5 at alpha 10.
  TrainingVerbalizer w;
  w.classes = {"A", "B"};
  w.token_sets = {{0}, {1}};
  w.source_labels.resize(2);
  const auto hard = smooth_targets(w, 0, 0.0, 4);
  const auto l = rosprompt_loss({{0.5, 0.25, 0.125, 0.125}}, hard, w, {0.0, 10.0});
  CHECK(std::abs(l.total - 5.6931) <= 1e-4);
  CHECK(l.omega == doctest::Approx(0.5));

  CHECK(code_of([] { LossConfig{-0.1, 1.0}.validate(); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { LossConfig{0.1, -1.0}.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("reduction to one-hot cross-entropy") {
  Rng rng(4, "reduction");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t vocab = 4 + rng.index(40);
    TrainingVerbalizer v;
    v.classes = {"A", "B", "C"};
    v.token_sets = {{0}, {1}, {2}};
    v.source_labels.resize(3);
    std::vector<double> logits(vocab);
    for (double& z : logits) z = rng.normal() * 3.0;
    const auto p = softmax(logits);
    const std::size_t c = rng.index(3);
    const auto loss = rosprompt_loss(p, smooth_targets(v, c, 0.0, vocab), v, {0.0, 0.0});
    CHECK(std::abs(loss.total - -std::log(p.probs[c])) <= 1e-12);
  }
}

TEST_CASE("softmax") {
  const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
  CHECK(p.probs[0] == doctest::Approx(0.5));
  CHECK(p.probs[2] >= 0.0);
  const auto q = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(q.probs[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("analytic logit gradient matches central differences") {
  Rng rng(99, "logit-fd");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t vocab = 4 + rng.index(47);
    const std::size_t classes = 2 + rng.index(std::min<std::size_t>(vocab - 2, 4));
    const auto v = testing::random_verbalizer(vocab, classes, rng);
    const std::size_t c = rng.index(classes);
    const LossConfig cfg{rng.uniform() * 0.9, rng.uniform() * 20.0};
    const auto y = smooth_targets(v, c, cfg.epsilon, vocab);
    std::vector<double> z(vocab);
    for (double& x : z) x = rng.normal();

    const auto analytic = loss_gradient_logits(softmax(z), y, v, cfg);
    std::vector<double> numeric(vocab);
    const double h = 1e-5;
    for (std::size_t j = 0; j < vocab; ++j) {
      auto zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      numeric[j] = (rosprompt_loss(softmax(zp), y, v, cfg).total -
                    rosprompt_loss(softmax(zm), y, v, cfg).total) /
                   (2 * h);
    }
    CHECK(testing::rel_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("softmax_backward of a constant gradient is zero") {
  const auto p = softmax(std::vector<double>{0.1, 0.5, -0.3});
  const auto dz = softmax_backward(p.probs, std::vector<double>{2.0, 2.0, 2.0});
  for (double x : dz) CHECK(std::abs(x) <= 1e-15);
}
