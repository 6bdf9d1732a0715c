#include "rosprompt/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rosprompt::kernels {

namespace {

inline double dot_row(std::span<const float> row, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    acc += static_cast<double>(row[j]) * v[j];
  }
  return acc;
}

inline double column_sum(MatrixView m, std::size_t j, std::span<const double> g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    acc += static_cast<double>(m.data[i * m.cols + j]) * g[i];
  }
  return acc;
}

inline double norm_row(std::span<const float> row) {
  double acc = 0.0;
  for (float x : row) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

inline float cosine_row(std::span<const float> row, double row_norm,
                        std::span<const double> anchor, double anchor_norm) {
  return static_cast<float>(dot_row(row, anchor) / (row_norm * anchor_norm));
}

}  // namespace

namespace serial {

void matvec(MatrixView m, std::span<const double> v, std::span<double> out) {
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot_row(m.row(i), v);
}

void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out) {
  for (std::size_t j = 0; j < m.cols; ++j) out[j] = column_sum(m, j, g);
}

void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    out[i] = cosine_row(m.row(i), row_norms[i], anchor, anchor_norm);
  }
}

void row_norms(MatrixView m, std::span<double> out) {
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = norm_row(m.row(i));
}

}  // namespace serial

namespace parallel {

void matvec(MatrixView m, std::span<const double> v, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    out[i] = dot_row(m.row(static_cast<std::size_t>(i)), v);
  }
}

void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out) {
  const auto cols = static_cast<std::ptrdiff_t>(m.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < cols; ++j) {
    out[j] = column_sum(m, static_cast<std::size_t>(j), g);
  }
}

void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out) {
  const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = cosine_row(m.row(r), row_norms[r], anchor, anchor_norm);
  }
}

void row_norms(MatrixView m, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    out[i] = norm_row(m.row(static_cast<std::size_t>(i)));
  }
}

}  // namespace parallel

namespace {
inline bool go_parallel(MatrixView m) {
  return m.rows * m.cols >= kParallelThreshold;
}
}  // namespace

void matvec(MatrixView m, std::span<const double> v, std::span<double> out) {
  go_parallel(m) ? parallel::matvec(m, v, out) : serial::matvec(m, v, out);
}

void matvec_transposed(MatrixView m, std::span<const double> g,
                       std::span<double> out) {
  go_parallel(m) ? parallel::matvec_transposed(m, g, out)
                 : serial::matvec_transposed(m, g, out);
}

void cosine_rows(MatrixView m, std::span<const double> row_norms,
                 std::span<const double> anchor, double anchor_norm,
                 std::span<float> out) {
  go_parallel(m) ? parallel::cosine_rows(m, row_norms, anchor, anchor_norm, out)
                 : serial::cosine_rows(m, row_norms, anchor, anchor_norm, out);
}

void row_norms(MatrixView m, std::span<double> out) {
  go_parallel(m) ? parallel::row_norms(m, out) : serial::row_norms(m, out);
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace rosprompt::kernels
