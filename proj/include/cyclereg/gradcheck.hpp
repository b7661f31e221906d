#pragma once

#include <functional>

#include "cyclereg/tensor.hpp"

namespace cyclereg {

/// Central-difference gradient of a scalar function, one element at a time.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                            double step = 1e-5);

/// ||a - b|| / max(||a|| + ||b||, floor). Zero when both are zero.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace cyclereg
