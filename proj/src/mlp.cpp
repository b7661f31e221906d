#include "cyclereg/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cyclereg {

namespace {
constexpr std::size_t npos = static_cast<std::size_t>(-1);
}

std::string_view name(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

std::optional<Activation> parse_activation(std::string_view text) {
  if (text == "none") return Activation::None;
  if (text == "relu") return Activation::Relu;
  if (text == "tanh") return Activation::Tanh;
  return std::nullopt;
}

MlpSpec MlpSpec::chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                       Activation activation, bool batchnorm, bool dropout, std::uint64_t seed) {
  MlpSpec spec;
  spec.seed = seed;
  std::size_t width = in;
  for (auto h : hidden) {
    spec.layers.push_back({width, h, activation, batchnorm, dropout});
    width = h;
  }
  spec.layers.push_back({width, out, Activation::None, false, false});
  return spec;
}

std::size_t MlpSpec::input_width() const {
  if (layers.empty()) throw std::invalid_argument("mlp spec has no layers");
  return layers.front().in;
}

std::size_t MlpSpec::output_width() const {
  if (layers.empty()) throw std::invalid_argument("mlp spec has no layers");
  return layers.back().out;
}

void MlpSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("mlp spec has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in == 0 || l.out == 0) {
      throw std::invalid_argument("layer " + std::to_string(k) + " has a zero width");
    }
    if (k + 1 < layers.size() && l.out != layers[k + 1].in) {
      throw std::invalid_argument("layer " + std::to_string(k) + " outputs " + std::to_string(l.out) +
                                  " features but layer " + std::to_string(k + 1) + " expects " +
                                  std::to_string(layers[k + 1].in));
    }
  }
  if (layers.back().activation != Activation::None) {
    throw std::invalid_argument("the final layer must be linear (activation none)");
  }
  if (!(dropout_probability >= 0.0 && dropout_probability < 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0, 1)");
  }
}

Mlp::Mlp(MlpSpec spec, std::uint32_t model) : spec_(std::move(spec)), model_(model) {
  spec_.validate();
  Rng rng(spec_.seed);
  for (const auto& l : spec_.layers) {
    param_offset_.push_back(params_.size());
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    Tensor w = Tensor::matrix(l.in, l.out);
    for (auto& v : w.values()) v = uniform(rng, -bound, bound);
    params_.push_back(std::move(w));
    params_.push_back(Tensor::matrix(1, l.out, 0.0));
    if (l.batchnorm) {
      params_.push_back(Tensor::matrix(1, l.out, 1.0));
      params_.push_back(Tensor::matrix(1, l.out, 0.0));
      bn_index_.push_back(bn_.size());
      bn_.push_back(BatchNormState::fresh(l.out));
    } else {
      bn_index_.push_back(npos);
    }
  }
}

template <typename Self, typename Bind, typename Norm>
NodeId Mlp::run(Self& self, Tape& tape, NodeId input, Mode mode, Rng* rng, Bind&& bind,
                Norm&& norm) {
  const auto& in = tape.value(input);
  if (in.rank() != 2 || in.cols() != self.input_width()) {
    throw ShapeError("mlp forward: expected batch with " + std::to_string(self.input_width()) +
                     " columns, got " + to_string(in.shape()));
  }
  NodeId h = input;
  for (std::size_t k = 0; k < self.spec_.layers.size(); ++k) {
    const auto& l = self.spec_.layers[k];
    const std::size_t p = self.param_offset_[k];
    h = tape.matmul(h, bind(p));
    h = tape.add_bias(h, bind(p + 1));
    if (l.batchnorm) h = norm(h, bind(p + 2), bind(p + 3), self.bn_index_[k]);
    switch (l.activation) {
      case Activation::None: break;
      case Activation::Relu: h = tape.relu(h); break;
      case Activation::Tanh: h = tape.tanh(h); break;
    }
    if (l.dropout && mode == Mode::Training) {
      if (rng == nullptr) throw std::invalid_argument("mlp forward: dropout in training mode needs an rng");
      h = tape.dropout(h, self.spec_.dropout_probability, mode, *rng);
    }
  }
  return h;
}

NodeId Mlp::forward(Tape& tape, NodeId input, Mode mode, Rng* rng) {
  return run(
      *this, tape, input, mode, rng,
      [&](std::size_t i) { return tape.parameter(id(i), params_[i]); },
      [&](NodeId x, NodeId g, NodeId b, std::size_t s) {
        return tape.batchnorm(x, g, b, bn_[s], mode);
      });
}

NodeId Mlp::forward_frozen(Tape& tape, NodeId input) const {
  return run(
      *this, tape, input, Mode::Inference, nullptr,
      [&](std::size_t i) { return tape.constant(params_[i]); },
      [&](NodeId x, NodeId g, NodeId b, std::size_t s) {
        return tape.batchnorm_inference(x, g, b, bn_[s]);
      });
}

Tensor Mlp::predict(const Tensor& batch) const {
  Tape tape;
  const NodeId out = forward_frozen(tape, tape.constant(batch));
  return tape.value(out);
}

void Mlp::recalibrate_batchnorm(const Tensor& inputs) {
  if (bn_.empty()) return;
  Tape tape;
  run(
      *this, tape, tape.constant(inputs), Mode::Inference, nullptr,
      [&](std::size_t i) { return tape.constant(params_[i]); },
      [&](NodeId x, NodeId g, NodeId b, std::size_t s) {
        BatchNormState& state = bn_[s];
        const double momentum = state.momentum;
        state.momentum = 1.0;
        const NodeId out = tape.batchnorm(x, g, b, state, Mode::Training);
        state.momentum = momentum;
        return out;
      });
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Tensor& Mlp::parameter(ParamId pid) {
  if (!owns(pid)) throw std::out_of_range("parameter id does not belong to this model");
  return params_[pid.index];
}

const Tensor& Mlp::parameter(ParamId pid) const {
  if (!owns(pid)) throw std::out_of_range("parameter id does not belong to this model");
  return params_[pid.index];
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.values().begin(), p.values().end());
  return flat;
}

void Mlp::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("flat parameter vector has " + std::to_string(flat.size()) +
                                " values, model has " + std::to_string(parameter_count()));
  }
  std::size_t at = 0;
  for (auto& p : params_) {
    for (auto& v : p.values()) v = flat[at++];
  }
}

}  // namespace cyclereg
