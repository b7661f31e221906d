#include "cyclereg/optimizer.hpp"

#include <cmath>

namespace cyclereg {

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {}

void Optimizer::apply(const Gradients& grads, const ParameterLookup& lookup) {
  ++steps_;
  const double lr = settings_.learning_rate;
  if (settings_.kind == OptimizerKind::Sgd) {
    for (const auto& [id, g] : grads) {
      Tensor& p = lookup(id);
      if (p.shape() != g.shape()) {
        throw ShapeError("optimizer: gradient " + to_string(g.shape()) + " does not match parameter " +
                         to_string(p.shape()));
      }
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
    return;
  }

  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (const auto& [id, g] : grads) {
    Tensor& p = lookup(id);
    if (p.shape() != g.shape()) {
      throw ShapeError("optimizer: gradient " + to_string(g.shape()) + " does not match parameter " +
                       to_string(p.shape()));
    }
    auto [it, fresh] = moments_.try_emplace(id);
    if (fresh) it->second = {Tensor(p.shape(), 0.0), Tensor(p.shape(), 0.0)};
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
    }
  }
}

double clip_global_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto& [_, g] : grads) {
      for (auto& v : g.values()) v *= s;
    }
  }
  return norm;
}

}  // namespace cyclereg
