#pragma once

// Dense kernels behind the autodiff primitives. Every kernel exists twice:
// a serial reference and an OpenMP version that partitions output rows
// across threads. Each output element is accumulated in the same order by
// both, so results are bit-identical regardless of thread count.

#include <cstddef>
#include <span>

namespace cyclereg::kernels {

/// Row-major matrix view.
struct ConstMat {
  const double* data;
  std::size_t rows;
  std::size_t cols;
};

struct MutMat {
  double* data;
  std::size_t rows;
  std::size_t cols;
};

namespace serial {
// out = a * b
void matmul(ConstMat a, ConstMat b, MutMat out);
// out = a^T * b
void matmul_tn(ConstMat a, ConstMat b, MutMat out);
// out = a * b^T
void matmul_nt(ConstMat a, ConstMat b, MutMat out);
// out[j] = sum_i a(i, j)
void column_sum(ConstMat a, std::span<double> out);
void tanh(std::span<const double> in, std::span<double> out);
}  // namespace serial

namespace omp {
void matmul(ConstMat a, ConstMat b, MutMat out);
void matmul_tn(ConstMat a, ConstMat b, MutMat out);
void matmul_nt(ConstMat a, ConstMat b, MutMat out);
void column_sum(ConstMat a, std::span<double> out);
void tanh(std::span<const double> in, std::span<double> out);
/// Threads OpenMP would use for a parallel region started here.
int max_threads();
}  // namespace omp

/// Work (multiply-adds) below which dispatch stays serial.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 17;

// Dispatching entry points used by the tape. They pick the OpenMP version
// for large problems when not already inside a parallel region.
void matmul(ConstMat a, ConstMat b, MutMat out);
void matmul_tn(ConstMat a, ConstMat b, MutMat out);
void matmul_nt(ConstMat a, ConstMat b, MutMat out);
void column_sum(ConstMat a, std::span<double> out);
void tanh(std::span<const double> in, std::span<double> out);

}  // namespace cyclereg::kernels
