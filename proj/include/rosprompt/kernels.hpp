#pragma once

#include <cstddef>
#include <span>

// Dense kernels over a row-major |V| x d float32 matrix.
//
// Every kernel has a serial reference version and an OpenMP version. The
// OpenMP versions partition the output index space only; each output element
// is accumulated in the same order as the serial version, so both produce
// bit-identical results regardless of thread count.
namespace rosprompt::kernels {

struct MatrixView {
  std::span<const float> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const float> row(std::size_t i) const {
    return data.subspan(i * cols, cols);
  }
};

namespace serial {

// out[i] = sum_j m[i][j] * v[j]
void matvec(MatrixView m, std::span<const double> v, std::span<double> out);

// out[j] = sum_i m[i][j] * g[i]
void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out);

// out[i] = float(m[i] . anchor / (row_norms[i] * anchor_norm))
void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out);

// out[i] = ||m[i]||
void row_norms(MatrixView m, std::span<double> out);

}  // namespace serial

namespace parallel {

void matvec(MatrixView m, std::span<const double> v, std::span<double> out);
void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out);
void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out);
void row_norms(MatrixView m, std::span<double> out);

}  // namespace parallel

// Below this many multiply-adds the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

void matvec(MatrixView m, std::span<const double> v, std::span<double> out);
void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out);
void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out);
void row_norms(MatrixView m, std::span<double> out);

// Number of threads the parallel kernels would use (1 without OpenMP).
int max_threads() noexcept;

}  // namespace rosprompt::kernels
