#include "doctest.h"
#include "rosprompt/kernels.hpp"
#include "test_support.hpp"

using namespace rosprompt;

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  for (std::size_t vocab : {3u, 257u, 4099u}) {
    const auto table = testing::random_table(vocab, 17, vocab);
    const auto m = table.matrix();
    Rng rng(vocab, "kernel-input");
    std::vector<double> v(m.cols), g(m.rows);
    for (double& x : v) x = rng.normal();
    for (double& x : g) x = rng.normal();

    std::vector<double> a(m.rows), b(m.rows);
    kernels::serial::matvec(m, v, a);
    kernels::parallel::matvec(m, v, b);
    CHECK(a == b);

    std::vector<double> at(m.cols), bt(m.cols);
    kernels::serial::matvec_transposed(m, g, at);
    kernels::parallel::matvec_transposed(m, g, bt);
    CHECK(at == bt);

    std::vector<double> na(m.rows), nb(m.rows);
    kernels::serial::row_norms(m, na);
    kernels::parallel::row_norms(m, nb);
    CHECK(na == nb);

    std::vector<float> ca(m.rows), cb(m.rows);
    kernels::serial::cosine_rows(m, na, v, 2.0, ca);
    kernels::parallel::cosine_rows(m, na, v, 2.0, cb);
    CHECK(ca == cb);
  }
}

TEST_CASE("matvec matches a naive triple loop") {
  const auto table = testing::random_table(9, 4, 3);
  const std::vector<double> v{1.0, -2.0, 0.5, 3.0};
  std::vector<double> out(9);
  kernels::matvec(table.matrix(), v, out);
  for (std::size_t i = 0; i < 9; ++i) {
    double expect = 0.0;
    for (std::size_t j = 0; j < 4; ++j) expect += table.data()[i * 4 + j] * v[j];
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-14));
  }
}
