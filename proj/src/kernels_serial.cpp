#include <cmath>

#include "cyclereg/kernels.hpp"
#include "kernel_rows.hpp"

namespace cyclereg::kernels::serial {

void matmul(ConstMat a, ConstMat b, MutMat out) {
  for (std::size_t i = 0; i < out.rows; ++i) detail::matmul_row(a, b, out, i);
}

void matmul_tn(ConstMat a, ConstMat b, MutMat out) {
  for (std::size_t p = 0; p < out.rows; ++p) detail::matmul_tn_row(a, b, out, p);
}

void matmul_nt(ConstMat a, ConstMat b, MutMat out) {
  for (std::size_t i = 0; i < out.rows; ++i) detail::matmul_nt_row(a, b, out, i);
}

void column_sum(ConstMat a, std::span<double> out) {
  // Row-wise accumulation keeps the inner loop contiguous; the per-column
  // summation order (ascending rows) matches detail::column_sum_col.
  for (std::size_t j = 0; j < a.cols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* r = a.data + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) out[j] += r[j];
  }
}

void tanh(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
}

}  // namespace cyclereg::kernels::serial
