#include "cyclereg/tape.hpp"

#include <cmath>
#include <string>

#include "cyclereg/kernels.hpp"
#include "cyclereg/random.hpp"

namespace cyclereg {

namespace {

kernels::ConstMat view(const Tensor& t) { return {t.values().data(), t.rows(), t.cols()}; }
kernels::MutMat view(Tensor& t) { return {t.values().data(), t.rows(), t.cols()}; }

[[noreturn]] void shape_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

bool is_matrix(const Tensor& t) { return t.rank() == 2; }

void accumulate(Tensor& into, const Tensor& delta) {
  if (into.empty()) {
    into = delta;
    return;
  }
  auto dst = into.values();
  auto src = delta.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view name(Primitive p) {
  switch (p) {
    case Primitive::Constant: return "constant";
    case Primitive::Parameter: return "parameter";
    case Primitive::MatMul: return "matmul";
    case Primitive::AddBias: return "add_bias";
    case Primitive::Relu: return "relu";
    case Primitive::Tanh: return "tanh";
    case Primitive::BatchNorm: return "batchnorm";
    case Primitive::Dropout: return "dropout";
    case Primitive::Subtract: return "subtract";
    case Primitive::Add: return "add";
    case Primitive::Scale: return "scale";
    case Primitive::ReduceMean: return "reduce_mean";
    case Primitive::Square: return "square";
    case Primitive::Abs: return "abs";
    case Primitive::SmoothL1: return "smooth_l1";
  }
  return "unknown";
}

BatchNormState BatchNormState::fresh(std::size_t features, double momentum, double epsilon) {
  return {Tensor::matrix(1, features, 0.0), Tensor::matrix(1, features, 1.0), momentum, epsilon};
}

const Tape::Node& Tape::node(NodeId id, std::string_view op) const {
  if (id.index >= nodes_.size()) {
    throw std::out_of_range(std::string(op) + ": node id " + std::to_string(id.index) +
                            " is not on this tape");
  }
  return nodes_[id.index];
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::unary(Primitive op, NodeId x, Tensor value, Tensor saved, double scalar) {
  Node n;
  n.op = op;
  n.inputs[0] = x.index;
  n.input_count = 1;
  n.value = std::move(value);
  n.saved = std::move(saved);
  n.scalar = scalar;
  n.needs_grad = nodes_[x.index].needs_grad;
  return push(std::move(n));
}

NodeId Tape::constant(Tensor value) {
  if (value.empty()) throw ShapeError("constant: empty tensor");
  Node n;
  n.op = Primitive::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::parameter(ParamId id, const Tensor& value) {
  if (auto it = params_.find(id); it != params_.end()) return NodeId{it->second};
  if (value.empty()) throw ShapeError("parameter: empty tensor");
  Node n;
  n.op = Primitive::Parameter;
  n.value = value;
  n.param = id;
  n.needs_grad = true;
  auto nid = push(std::move(n));
  params_.emplace(id, nid.index);
  return nid;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto& na = node(a, "matmul");
  const auto& nb = node(b, "matmul");
  if (!is_matrix(na.value) || !is_matrix(nb.value) || na.value.cols() != nb.value.rows()) {
    shape_error("matmul", na.value, nb.value);
  }
  Tensor out = Tensor::matrix(na.value.rows(), nb.value.cols());
  kernels::matmul(view(na.value), view(nb.value), view(out));
  Node n;
  n.op = Primitive::MatMul;
  n.inputs = {a.index, b.index, 0};
  n.input_count = 2;
  n.value = std::move(out);
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

NodeId Tape::add_bias(NodeId x, NodeId bias) {
  const auto& nx = node(x, "add_bias");
  const auto& nb = node(bias, "add_bias");
  if (!is_matrix(nx.value) || nb.value.size() != nx.value.cols()) {
    shape_error("add_bias", nx.value, nb.value);
  }
  Tensor out = nx.value;
  const auto cols = out.cols();
  auto b = nb.value.values();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < cols; ++j) row[j] += b[j];
  }
  Node n;
  n.op = Primitive::AddBias;
  n.inputs = {x.index, bias.index, 0};
  n.input_count = 2;
  n.value = std::move(out);
  n.needs_grad = nx.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  const auto& nx = node(x, "relu");
  Tensor out = nx.value;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return unary(Primitive::Relu, x, std::move(out));
}

NodeId Tape::tanh(NodeId x) {
  const auto& nx = node(x, "tanh");
  Tensor out(nx.value.shape());
  kernels::tanh(nx.value.values(), out.values());
  return unary(Primitive::Tanh, x, std::move(out));
}

NodeId Tape::batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, Mode mode) {
  return batchnorm_impl(x, gamma, beta, state, mode == Mode::Training ? &state : nullptr);
}

NodeId Tape::batchnorm_inference(NodeId x, NodeId gamma, NodeId beta, const BatchNormState& state) {
  return batchnorm_impl(x, gamma, beta, state, nullptr);
}

NodeId Tape::batchnorm_impl(NodeId x, NodeId gamma, NodeId beta, const BatchNormState& state,
                            BatchNormState* update) {
  const bool training = update != nullptr;
  const auto& nx = node(x, "batchnorm");
  const auto& ng = node(gamma, "batchnorm");
  const auto& nb = node(beta, "batchnorm");
  if (!is_matrix(nx.value)) throw ShapeError("batchnorm: input must be a matrix");
  const std::size_t rows = nx.value.rows();
  const std::size_t cols = nx.value.cols();
  if (ng.value.size() != cols) shape_error("batchnorm (gamma)", nx.value, ng.value);
  if (nb.value.size() != cols) shape_error("batchnorm (beta)", nx.value, nb.value);
  if (state.running_mean.size() != cols || state.running_var.size() != cols) {
    shape_error("batchnorm (running statistics)", nx.value, state.running_mean);
  }

  Tensor mean = Tensor::matrix(1, cols);
  Tensor inv_std = Tensor::matrix(1, cols);
  if (training) {
    if (rows < 2) {
      throw ShapeError("batchnorm: training mode needs at least 2 rows, got " +
                       to_string(nx.value.shape()));
    }
    kernels::column_sum(view(nx.value), mean.values());
    for (auto& m : mean.values()) m /= static_cast<double>(rows);
    Tensor var = Tensor::matrix(1, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = nx.value.row(r);
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = row[j] - mean[j];
        var[j] += d * d;
      }
    }
    const double n = static_cast<double>(rows);
    for (std::size_t j = 0; j < cols; ++j) {
      const double biased = var[j] / n;
      inv_std[j] = 1.0 / std::sqrt(biased + state.epsilon);
      const double unbiased = var[j] / (n - 1.0);
      update->running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
      update->running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < cols; ++j) {
      mean[j] = state.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    }
  }

  Tensor xhat(nx.value.shape());
  Tensor out(nx.value.shape());
  auto g = ng.value.values();
  auto b = nb.value.values();
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = nx.value.row(r);
    auto xh = xhat.row(r);
    auto o = out.row(r);
    for (std::size_t j = 0; j < cols; ++j) {
      xh[j] = (in[j] - mean[j]) * inv_std[j];
      o[j] = g[j] * xh[j] + b[j];
    }
  }

  Node n;
  n.op = Primitive::BatchNorm;
  n.inputs = {x.index, gamma.index, beta.index};
  n.input_count = 3;
  n.value = std::move(out);
  n.saved = std::move(xhat);
  n.saved2 = std::move(inv_std);
  n.scalar = training ? 1.0 : 0.0;
  n.needs_grad = nx.needs_grad || ng.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

NodeId Tape::dropout(NodeId x, double drop_probability, Mode mode, std::mt19937_64& rng) {
  const auto& nx = node(x, "dropout");
  if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
    throw std::invalid_argument("dropout: probability must lie in [0, 1), got " +
                                std::to_string(drop_probability));
  }
  if (mode == Mode::Inference || drop_probability == 0.0) {
    Tensor mask(nx.value.shape(), 1.0);
    return unary(Primitive::Dropout, x, nx.value, std::move(mask));
  }
  const double keep_scale = 1.0 / (1.0 - drop_probability);
  Tensor mask(nx.value.shape());
  Tensor out(nx.value.shape());
  auto in = nx.value.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask[i] = uniform01(rng) < drop_probability ? 0.0 : keep_scale;
    out[i] = in[i] * mask[i];
  }
  return unary(Primitive::Dropout, x, std::move(out), std::move(mask));
}

NodeId Tape::subtract(NodeId a, NodeId b) {
  const auto& na = node(a, "subtract");
  const auto& nb = node(b, "subtract");
  if (na.value.shape() != nb.value.shape()) shape_error("subtract", na.value, nb.value);
  Tensor out = na.value;
  auto src = nb.value.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  Node n;
  n.op = Primitive::Subtract;
  n.inputs = {a.index, b.index, 0};
  n.input_count = 2;
  n.value = std::move(out);
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const auto& na = node(a, "add");
  const auto& nb = node(b, "add");
  if (na.value.shape() != nb.value.shape()) shape_error("add", na.value, nb.value);
  Tensor out = na.value;
  auto src = nb.value.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  Node n;
  n.op = Primitive::Add;
  n.inputs = {a.index, b.index, 0};
  n.input_count = 2;
  n.value = std::move(out);
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double factor) {
  Tensor out = node(x, "scale").value;
  for (auto& v : out.values()) v *= factor;
  return unary(Primitive::Scale, x, std::move(out), {}, factor);
}

NodeId Tape::reduce_mean(NodeId x) {
  const auto& nx = node(x, "reduce_mean");
  double acc = 0.0;
  for (double v : nx.value.values()) acc += v;
  return unary(Primitive::ReduceMean, x, Tensor::scalar(acc / static_cast<double>(nx.value.size())));
}

NodeId Tape::square(NodeId x) {
  Tensor out = node(x, "square").value;
  for (auto& v : out.values()) v *= v;
  return unary(Primitive::Square, x, std::move(out));
}

NodeId Tape::abs(NodeId x) {
  Tensor out = node(x, "abs").value;
  for (auto& v : out.values()) v = std::fabs(v);
  return unary(Primitive::Abs, x, std::move(out));
}

NodeId Tape::smooth_l1(NodeId x, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("smooth_l1: threshold must be positive");
  Tensor out = node(x, "smooth_l1").value;
  for (auto& v : out.values()) {
    const double a = std::fabs(v);
    v = a < threshold ? 0.5 * v * v / threshold : a - 0.5 * threshold;
  }
  return unary(Primitive::SmoothL1, x, std::move(out), {}, threshold);
}

Gradients Tape::backward(NodeId loss) const {
  const auto& root = node(loss, "backward");
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss node must be scalar, got shape " + to_string(root.value.shape()));
  }

  std::vector<Tensor> grads(loss.index + 1);
  grads[loss.index] = Tensor(root.value.shape(), 1.0);

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (grads[idx].empty() || !n.needs_grad) continue;
    const Tensor& g = grads[idx];
    auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].needs_grad; };
    auto input_value = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.op) {
      case Primitive::Constant:
      case Primitive::Parameter:
        break;
      case Primitive::MatMul: {
        const Tensor& a = input_value(0);
        const Tensor& b = input_value(1);
        if (wants(0)) {
          Tensor da(a.shape());
          kernels::matmul_nt(view(g), view(b), view(da));
          accumulate(grads[n.inputs[0]], da);
        }
        if (wants(1)) {
          Tensor db(b.shape());
          kernels::matmul_tn(view(a), view(g), view(db));
          accumulate(grads[n.inputs[1]], db);
        }
        break;
      }
      case Primitive::AddBias: {
        if (wants(0)) accumulate(grads[n.inputs[0]], g);
        if (wants(1)) {
          Tensor db(input_value(1).shape());
          kernels::column_sum(view(g), db.values());
          accumulate(grads[n.inputs[1]], db);
        }
        break;
      }
      case Primitive::Relu: {
        Tensor dx = g;
        auto in = input_value(0).values();
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (!(in[i] > 0.0)) dx[i] = 0.0;
        }
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::Tanh: {
        Tensor dx = g;
        auto y = n.value.values();
        for (std::size_t i = 0; i < y.size(); ++i) dx[i] *= 1.0 - y[i] * y[i];
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::BatchNorm: {
        const Tensor& xhat = n.saved;
        const Tensor& inv_std = n.saved2;
        const Tensor& gamma = input_value(1);
        const std::size_t rows = xhat.rows();
        const std::size_t cols = xhat.cols();
        Tensor dgamma = Tensor::matrix(1, cols);
        Tensor dbeta = Tensor::matrix(1, cols);
        for (std::size_t r = 0; r < rows; ++r) {
          auto gr = g.row(r);
          auto xr = xhat.row(r);
          for (std::size_t j = 0; j < cols; ++j) {
            dgamma[j] += gr[j] * xr[j];
            dbeta[j] += gr[j];
          }
        }
        if (wants(0)) {
          Tensor dx(xhat.shape());
          if (n.scalar != 0.0) {
            const double count = static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
              auto gr = g.row(r);
              auto xr = xhat.row(r);
              auto dr = dx.row(r);
              for (std::size_t j = 0; j < cols; ++j) {
                // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
                dr[j] = gamma[j] * inv_std[j] / count *
                        (count * gr[j] - dbeta[j] - xr[j] * dgamma[j]);
              }
            }
          } else {
            for (std::size_t r = 0; r < rows; ++r) {
              auto gr = g.row(r);
              auto dr = dx.row(r);
              for (std::size_t j = 0; j < cols; ++j) dr[j] = gr[j] * gamma[j] * inv_std[j];
            }
          }
          accumulate(grads[n.inputs[0]], dx);
        }
        if (wants(1)) accumulate(grads[n.inputs[1]], dgamma);
        if (wants(2)) accumulate(grads[n.inputs[2]], dbeta);
        break;
      }
      case Primitive::Dropout: {
        Tensor dx = g;
        auto mask = n.saved.values();
        for (std::size_t i = 0; i < mask.size(); ++i) dx[i] *= mask[i];
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::Subtract: {
        if (wants(0)) accumulate(grads[n.inputs[0]], g);
        if (wants(1)) {
          Tensor neg = g;
          for (auto& v : neg.values()) v = -v;
          accumulate(grads[n.inputs[1]], neg);
        }
        break;
      }
      case Primitive::Add: {
        if (wants(0)) accumulate(grads[n.inputs[0]], g);
        if (wants(1)) accumulate(grads[n.inputs[1]], g);
        break;
      }
      case Primitive::Scale: {
        Tensor dx = g;
        for (auto& v : dx.values()) v *= n.scalar;
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::ReduceMean: {
        const Tensor& x = input_value(0);
        Tensor dx(x.shape(), g.item() / static_cast<double>(x.size()));
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::Square: {
        Tensor dx = g;
        auto x = input_value(0).values();
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] *= 2.0 * x[i];
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::Abs: {
        Tensor dx = g;
        auto x = input_value(0).values();
        for (std::size_t i = 0; i < x.size(); ++i) {
          dx[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        }
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
      case Primitive::SmoothL1: {
        Tensor dx = g;
        auto x = input_value(0).values();
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double a = std::fabs(x[i]);
          const double slope = a < n.scalar ? x[i] / n.scalar : (x[i] > 0.0 ? 1.0 : -1.0);
          dx[i] *= slope;
        }
        accumulate(grads[n.inputs[0]], dx);
        break;
      }
    }
  }

  Gradients out;
  for (const auto& [id, idx] : params_) {
    if (idx <= loss.index && !grads[idx].empty()) {
      out.emplace(id, std::move(grads[idx]));
    } else {
      out.emplace(id, Tensor(nodes_[idx].value.shape(), 0.0));
    }
  }
  return out;
}

}  // namespace cyclereg
