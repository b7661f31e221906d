#include "cyclereg/model_pair.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cyclereg {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'Y', 'C', 'R', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

void check_width(const Tensor& batch, std::size_t width, std::string_view what) {
  if (batch.rank() != 2 || batch.cols() != width) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(width) +
                     " columns, got " + to_string(batch.shape()));
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  write_pod<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, std::size_t expected) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n != expected) {
    throw std::runtime_error("checkpoint block holds " + std::to_string(n) + " values, expected " +
                             std::to_string(expected));
  }
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

void write_model(std::ostream& out, const Mlp& m) {
  write_doubles(out, m.flat_parameters());
  for (const auto& s : m.batchnorm_states()) {
    write_doubles(out, s.running_mean.values());
    write_doubles(out, s.running_var.values());
  }
}

void read_model(std::istream& in, Mlp& m) {
  m.set_flat_parameters(read_doubles(in, m.parameter_count()));
  for (auto& s : m.batchnorm_states()) {
    auto mean = read_doubles(in, s.running_mean.size());
    auto var = read_doubles(in, s.running_var.size());
    std::copy(mean.begin(), mean.end(), s.running_mean.values().begin());
    std::copy(var.begin(), var.end(), s.running_var.values().begin());
  }
}

}  // namespace

ModelPair::ModelPair(MlpSpec phi_spec, MlpSpec psi_spec)
    : phi_(std::move(phi_spec), kForwardModel), psi_(std::move(psi_spec), kBackwardModel) {
  if (phi_.input_width() != psi_.output_width() || phi_.output_width() != psi_.input_width()) {
    throw std::invalid_argument(
        "model pair widths do not mirror: phi maps " + std::to_string(phi_.input_width()) + " -> " +
        std::to_string(phi_.output_width()) + ", psi maps " + std::to_string(psi_.input_width()) +
        " -> " + std::to_string(psi_.output_width()));
  }
}

Mlp& ModelPair::owner(ParamId id) {
  if (phi_.owns(id)) return phi_;
  if (psi_.owns(id)) return psi_;
  throw std::out_of_range("parameter id belongs to neither model");
}

std::string_view name(CycleDirection d) {
  return d == CycleDirection::Forward ? "forward" : "backward";
}

CycleNodes cycle_forward(ModelPair& pair, Tape& tape, NodeId batch, CycleDirection direction,
                         Mode mode, Rng* rng) {
  const Tensor& in = tape.value(batch);
  if (direction == CycleDirection::Forward) {
    check_width(in, pair.x_width(), "forward cycle");
    const NodeId y = pair.phi().forward(tape, batch, mode, rng);
    return {y, pair.psi().forward(tape, y, mode, rng)};
  }
  check_width(in, pair.y_width(), "backward cycle");
  const NodeId x = pair.psi().forward(tape, batch, mode, rng);
  return {x, pair.phi().forward(tape, x, mode, rng)};
}

std::pair<Tensor, Tensor> cycle_predict(const ModelPair& pair, const Tensor& batch,
                                        CycleDirection direction) {
  if (direction == CycleDirection::Forward) {
    check_width(batch, pair.x_width(), "forward cycle");
    Tensor inner = pair.phi().predict(batch);
    Tensor recon = pair.psi().predict(inner);
    return {std::move(inner), std::move(recon)};
  }
  check_width(batch, pair.y_width(), "backward cycle");
  Tensor inner = pair.psi().predict(batch);
  Tensor recon = pair.phi().predict(inner);
  return {std::move(inner), std::move(recon)};
}

nlohmann::json to_json(const MlpSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"activation", std::string(name(l.activation))},
                      {"batchnorm", l.batchnorm},
                      {"dropout", l.dropout}});
  }
  return {{"layers", layers}, {"seed", spec.seed}, {"dropout_probability", spec.dropout_probability}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.dropout_probability = j.at("dropout_probability").get<double>();
  for (const auto& l : j.at("layers")) {
    const auto act = parse_activation(l.at("activation").get<std::string>());
    if (!act) throw std::invalid_argument("unknown activation in model spec");
    spec.layers.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(), *act,
                           l.at("batchnorm").get<bool>(), l.at("dropout").get<bool>()});
  }
  spec.validate();
  return spec;
}

void save_checkpoint(const std::filesystem::path& path, const ModelPair& pair,
                     const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  const nlohmann::json header = {
      {"phi", to_json(pair.phi().spec())}, {"psi", to_json(pair.psi().spec())}, {"metadata", metadata}};
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_model(out, pair.phi());
  write_model(out, pair.psi());
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a checkpoint file: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_size = read_pod<std::uint64_t>(in);
  std::string text(header_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw std::runtime_error("checkpoint truncated");
  const auto header = nlohmann::json::parse(text);
  Checkpoint ck{ModelPair(mlp_spec_from_json(header.at("phi")), mlp_spec_from_json(header.at("psi"))),
                header.at("metadata")};
  read_model(in, ck.pair.phi());
  read_model(in, ck.pair.psi());
  return ck;
}

}  // namespace cyclereg
