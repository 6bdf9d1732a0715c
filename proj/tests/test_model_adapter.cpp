#include <cstring>

#include "doctest.h"
#include "rosprompt/error.hpp"
#include "rosprompt/model_adapter.hpp"
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

SoftPrompt random_soft_prompt(std::size_t m, std::size_t d, Rng& rng) {
  SoftPrompt p;
  p.dim = d;
  p.values.resize(m * d);
  for (float& x : p.values) x = static_cast<float>(rng.normal());
  return p;
}

}  // namespace

TEST_CASE("toy backend logits on orthonormal embeddings") {
  auto table = std::make_shared<const EmbeddingTable>(
      testing::orthonormal_table({"a", "b", "c", "d"}));
  ToyBackend backend(table);
  SoftPrompt zero;
  zero.dim = 4;
  zero.values.assign(4, 0.0f);
  const std::vector<TokenId> input{2};
  const auto z = backend.score({input, zero});
  // z_j = emb(t_j) . emb(c) / 2
  CHECK(z.logits == std::vector<double>{0.0, 0.0, 0.5, 0.0});
}

TEST_CASE("toy backend is order-free and linear in the prompt") {
  auto table = testing::shared_random_table(30, 8, 1);
  ToyBackend backend(table);
  Rng rng(2, "toy-linear");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(4);
    std::vector<TokenId> input(n);
    for (auto& t : input) t = static_cast<TokenId>(rng.index(30));
    const auto p = random_soft_prompt(m, 8, rng);

    auto reversed = input;
    std::reverse(reversed.begin(), reversed.end());
    const auto z = backend.score({input, p}).logits;
    const auto zr = backend.score({reversed, p}).logits;
    for (std::size_t j = 0; j < 30; ++j) CHECK(z[j] == doctest::Approx(zr[j]).epsilon(1e-12));

    // Superposition in one row: z(P with row r = a + b) = z(a) + z(b) - z(row r = 0).
    const std::size_t r = rng.index(m);
    SoftPrompt pa = p, pb = p, pab = p, p0 = p;
    for (std::size_t j = 0; j < 8; ++j) {
      const float a = static_cast<float>(rng.normal()), b = static_cast<float>(rng.normal());
      pa.row(r)[j] = a;
      pb.row(r)[j] = b;
      pab.row(r)[j] = a + b;
      p0.row(r)[j] = 0.0f;
    }
    const auto za = backend.score({input, pa}).logits, zb = backend.score({input, pb}).logits,
               zab = backend.score({input, pab}).logits, z0 = backend.score({input, p0}).logits;
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(zab[j] == doctest::Approx(za[j] + zb[j] - z0[j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("toy backend skips unknown tokens and enforces max length") {
  auto table = testing::shared_random_table(10, 3, 4);
  ToyBackend backend(table, BackendKind::EncoderOnly, 6);
  Rng rng(1, "x");
  const auto p = random_soft_prompt(2, 3, rng);
  const std::vector<TokenId> with_unknown{1, kUnknownToken, 2}, plain{1, 2};
  CHECK(backend.score({with_unknown, p}).logits == backend.score({plain, p}).logits);
  const std::vector<TokenId> three{1, 2, 3}, four{1, 2, 3, 4};
  CHECK_NOTHROW(backend.score({three, p}));
  CHECK(code_of([&] { backend.score({four, p}); }) == ErrorCode::InputTooLong);
  CHECK(code_of([&] { backend.score({std::span<const TokenId>{}, p}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(backend.descriptor().kind == BackendKind::EncoderOnly);
  CHECK(default_position(BackendKind::EncoderOnly) == ScoringPosition::MaskSlot);
  CHECK(default_position(BackendKind::DecoderOnly) == ScoringPosition::NextToken);
}

TEST_CASE("grad_prompt closed form") {
  auto table = testing::shared_random_table(12, 5, 8);
  ToyBackend backend(table);
  Rng rng(3, "grad");
  const auto p = random_soft_prompt(3, 5, rng);
  const std::vector<TokenId> input{0, 4};

  std::vector<double> zero(12, 0.0);
  for (double g : backend.grad_prompt({input, p}, zero).values) CHECK(g == 0.0);

  std::vector<double> up(12);
  for (double& u : up) u = rng.normal();
  const auto g = backend.grad_prompt({input, p}, up);
  REQUIRE(g.values.size() == 15);
  for (std::size_t j = 0; j < 5; ++j) {
    double expect = 0.0;
    for (std::size_t t = 0; t < 12; ++t) expect += table->row(t)[j] * up[t];
    expect /= 5.0;
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(g.values[r * 5 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("grad_prompt through the full loss matches finite differences") {
  Rng rng(123, "prompt-fd");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t vocab = 5 + rng.index(46), dim = 2 + rng.index(15);
    auto table = testing::shared_random_table(vocab, dim, 1000 + trial);
    ToyBackend backend(table);
    const std::size_t classes = 2 + rng.index(3);
    const auto v = testing::random_verbalizer(vocab, classes, rng);
    const std::size_t c = rng.index(classes);
    const LossConfig cfg{rng.uniform() * 0.5, rng.uniform() * 10.0};
    const auto y = smooth_targets(v, c, cfg.epsilon, vocab);
    std::vector<TokenId> input(1 + rng.index(5));
    for (auto& t : input) t = static_cast<TokenId>(rng.index(vocab));
    auto p = random_soft_prompt(1 + rng.index(3), dim, rng);

    const auto loss_at = [&](const SoftPrompt& q) {
      return rosprompt_loss(softmax(backend.score({input, q}).logits), y, v, cfg).total;
    };
    const auto pred = softmax(backend.score({input, p}).logits);
    const auto analytic =
        backend.grad_prompt({input, p}, loss_gradient_logits(pred, y, v, cfg)).values;
    std::vector<double> numeric(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      SoftPrompt plus = p, minus = p;
      plus.values[i] += 1e-3f;
      minus.values[i] -= 1e-3f;
      // Divide by the step that float storage actually realized.
      const double step = static_cast<double>(plus.values[i]) - minus.values[i];
      numeric[i] = (loss_at(plus) - loss_at(minus)) / step;
    }
    CHECK(testing::rel_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("prompt checkpoints") {
  testing::TempDir dir;
  auto table = testing::shared_random_table(10, 4, 5);
  ToyBackend backend(table);
  Rng rng(8, "ckpt");
  auto p = random_soft_prompt(3, 4, rng);
  p.init_source = "In this sentence";
  p.trained_steps = 42;
  save_prompt(p, dir / "p.bin");

  const auto back = load_prompt(dir / "p.bin", backend);
  CHECK(back.dim == 4);
  CHECK(back.init_source == p.init_source);
  CHECK(back.trained_steps == 42);
  CHECK(std::memcmp(back.values.data(), p.values.data(), p.values.size() * sizeof(float)) == 0);

  CHECK(code_of([&] { load_prompt(dir / "absent.bin", backend); }) == ErrorCode::PromptNotFound);
  CHECK(code_of([&] { load_prompt(dir / "p.bin", 5); }) == ErrorCode::IncompatiblePrompt);

  const std::string bytes = testing::slurp(dir / "p.bin");
  dir.write("trunc.bin", bytes.substr(0, bytes.size() - 1));
  CHECK(code_of([&] { load_prompt(dir / "trunc.bin", backend); }) ==
        ErrorCode::InvalidCheckpoint);
  dir.write("trail.bin", bytes + "x");
  CHECK(code_of([&] { load_prompt(dir / "trail.bin", backend); }) ==
        ErrorCode::InvalidCheckpoint);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  dir.write("magic.bin", bad_magic);
  CHECK(code_of([&] { load_prompt(dir / "magic.bin", backend); }) ==
        ErrorCode::InvalidCheckpoint);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  dir.write("version.bin", bad_version);
  CHECK(code_of([&] { load_prompt(dir / "version.bin", backend); }) ==
        ErrorCode::InvalidCheckpoint);
}

TEST_CASE("backend kinds and fingerprint") {
  CHECK(parse_backend_kind("encoder-decoder") == BackendKind::EncoderDecoder);
  CHECK(kind_name(BackendKind::DecoderOnly) == "decoder-only");
  CHECK(code_of([] { parse_backend_kind("rnn"); }) == ErrorCode::InvalidConfig);

  auto a = testing::shared_random_table(10, 4, 5);
  auto b = testing::shared_random_table(10, 4, 6);
  CHECK(ToyBackend(a).parameter_fingerprint() == ToyBackend(a).parameter_fingerprint());
  CHECK(ToyBackend(a).parameter_fingerprint() != ToyBackend(b).parameter_fingerprint());
}
