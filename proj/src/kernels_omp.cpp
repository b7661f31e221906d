#include <omp.h>

#include <cmath>
#include <cstdint>

#include "cyclereg/kernels.hpp"
#include "kernel_rows.hpp"

namespace cyclereg::kernels {

namespace omp {

void matmul(ConstMat a, ConstMat b, MutMat out) {
  const auto rows = static_cast<std::int64_t>(out.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    detail::matmul_row(a, b, out, static_cast<std::size_t>(i));
  }
}

void matmul_tn(ConstMat a, ConstMat b, MutMat out) {
  const auto rows = static_cast<std::int64_t>(out.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < rows; ++p) {
    detail::matmul_tn_row(a, b, out, static_cast<std::size_t>(p));
  }
}

void matmul_nt(ConstMat a, ConstMat b, MutMat out) {
  const auto rows = static_cast<std::int64_t>(out.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    detail::matmul_nt_row(a, b, out, static_cast<std::size_t>(i));
  }
}

void column_sum(ConstMat a, std::span<double> out) {
  const auto cols = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < cols; ++j) {
    out[static_cast<std::size_t>(j)] = detail::column_sum_col(a, static_cast<std::size_t>(j));
  }
}

void tanh(std::span<const double> in, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = std::tanh(in[static_cast<std::size_t>(i)]);
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace omp

namespace {

bool go_parallel(std::size_t work) {
  return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

}  // namespace

void matmul(ConstMat a, ConstMat b, MutMat out) {
  if (go_parallel(a.rows * a.cols * b.cols)) {
    omp::matmul(a, b, out);
  } else {
    serial::matmul(a, b, out);
  }
}

void matmul_tn(ConstMat a, ConstMat b, MutMat out) {
  if (go_parallel(a.rows * a.cols * b.cols)) {
    omp::matmul_tn(a, b, out);
  } else {
    serial::matmul_tn(a, b, out);
  }
}

void matmul_nt(ConstMat a, ConstMat b, MutMat out) {
  if (go_parallel(a.rows * a.cols * b.rows)) {
    omp::matmul_nt(a, b, out);
  } else {
    serial::matmul_nt(a, b, out);
  }
}

void column_sum(ConstMat a, std::span<double> out) {
  if (go_parallel(a.rows * a.cols)) {
    omp::column_sum(a, out);
  } else {
    serial::column_sum(a, out);
  }
}

void tanh(std::span<const double> in, std::span<double> out) {
  // tanh costs roughly 20 multiply-adds per element.
  if (go_parallel(in.size() * 20)) {
    omp::tanh(in, out);
  } else {
    serial::tanh(in, out);
  }
}

}  // namespace cyclereg::kernels
