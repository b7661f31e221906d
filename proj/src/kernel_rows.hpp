#pragma once

// Per-output-row bodies shared by the serial and OpenMP kernels.

#include <cmath>
#include <cstddef>

#include "cyclereg/kernels.hpp"

namespace cyclereg::kernels::detail {

inline void matmul_row(ConstMat a, ConstMat b, MutMat out, std::size_t i) {
  double* o = out.data + i * out.cols;
  for (std::size_t j = 0; j < out.cols; ++j) o[j] = 0.0;
  const double* ar = a.data + i * a.cols;
  for (std::size_t p = 0; p < a.cols; ++p) {
    const double s = ar[p];
    const double* br = b.data + p * b.cols;
    for (std::size_t j = 0; j < out.cols; ++j) o[j] += s * br[j];
  }
}

// Row p of a^T b: sum over samples i of a(i, p) * b(i, :).
inline void matmul_tn_row(ConstMat a, ConstMat b, MutMat out, std::size_t p) {
  double* o = out.data + p * out.cols;
  for (std::size_t j = 0; j < out.cols; ++j) o[j] = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double s = a.data[i * a.cols + p];
    const double* br = b.data + i * b.cols;
    for (std::size_t j = 0; j < out.cols; ++j) o[j] += s * br[j];
  }
}

inline void matmul_nt_row(ConstMat a, ConstMat b, MutMat out, std::size_t i) {
  const double* ar = a.data + i * a.cols;
  double* o = out.data + i * out.cols;
  for (std::size_t k = 0; k < b.rows; ++k) {
    const double* br = b.data + k * b.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += ar[j] * br[j];
    o[k] = acc;
  }
}

inline double column_sum_col(ConstMat a, std::size_t j) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) acc += a.data[i * a.cols + j];
  return acc;
}

}  // namespace cyclereg::kernels::detail
