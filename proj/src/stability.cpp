#include "cyclereg/stability.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "cyclereg/dataset.hpp"
#include "cyclereg/report.hpp"

namespace cyclereg::stability {

void DynSystem::validate(double tolerance) const {
  if (!map) throw std::invalid_argument("dynamical system has no map");
  if (!(lipschitz >= 0.0 && lipschitz < 1.0)) {
    throw std::invalid_argument("Lipschitz bound must lie in [0, 1), got " + std::to_string(lipschitz));
  }
  if (!(delta_max >= 0.0) || !std::isfinite(delta_max)) {
    throw std::invalid_argument("delta_max must be a finite non-negative number");
  }
  if (equilibrium.size() == 0) throw std::invalid_argument("state dimension must be positive");
  if (split > dimension()) throw std::invalid_argument("state split exceeds the dimension");
  const State fixed = map(equilibrium);
  if (fixed.size() != equilibrium.size()) throw std::invalid_argument("map changes the state dimension");
  if ((fixed - equilibrium).norm() > tolerance * std::max(1.0, equilibrium.norm())) {
    throw std::invalid_argument("equilibrium is not a fixed point of the map");
  }
}

AffineSystem random_affine_contraction(std::size_t dimension, double lipschitz, double delta_max,
                                       std::uint64_t seed) {
  if (dimension == 0) throw std::invalid_argument("state dimension must be positive");
  if (!(lipschitz >= 0.0 && lipschitz < 1.0)) {
    throw std::invalid_argument("Lipschitz bound must lie in [0, 1), got " + std::to_string(lipschitz));
  }
  const auto n = static_cast<Eigen::Index>(dimension);
  Rng rng(seed);
  AffineSystem s;
  s.a = Eigen::MatrixXd(n, n);
  s.c = State(n);
  double sigma = 0.0;
  while (sigma == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) s.a(i, j) = uniform(rng, -1.0, 1.0);
    }
    sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(s.a).singularValues()(0);
  }
  s.a *= lipschitz / sigma;
  for (Eigen::Index i = 0; i < n; ++i) s.c(i) = uniform(rng, -1.0, 1.0);
  const Eigen::MatrixXd i_minus_a = Eigen::MatrixXd::Identity(n, n) - s.a;
  const State x_star = i_minus_a.partialPivLu().solve(s.c);

  s.system.lipschitz = lipschitz;
  s.system.equilibrium = x_star;
  s.system.delta_max = delta_max;
  s.system.split = dimension;
  s.system.map = [a = s.a, c = s.c](const State& x) -> State { return a * x + c; };
  return s;
}

State sample_ball(std::size_t dimension, double radius, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(dimension);
  State dir(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      // Box-Muller from the portable uniform source.
      const double u1 = 1.0 - uniform01(rng);
      const double u2 = uniform01(rng);
      dir(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    norm = dir.norm();
  }
  const double r = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(dimension));
  return dir * (r / norm);
}

double lyapunov_v(const State& x, const State& equilibrium) {
  if (x.size() != equilibrium.size()) {
    throw std::invalid_argument("lyapunov_v: state has dimension " + std::to_string(x.size()) +
                                ", equilibrium has " + std::to_string(equilibrium.size()));
  }
  return (x - equilibrium).squaredNorm();
}

TrajectoryRecord simulate(const DynSystem& system, const State& x0, std::size_t steps, std::uint64_t seed) {
  if (steps == 0) throw std::invalid_argument("simulate: need at least one step");
  if (static_cast<std::size_t>(x0.size()) != system.dimension()) {
    throw std::invalid_argument("simulate: initial state has dimension " + std::to_string(x0.size()) +
                                ", system has " + std::to_string(system.dimension()));
  }
  if (!system.map) throw std::invalid_argument("simulate: system has no map");
  Rng rng(seed);
  TrajectoryRecord rec;
  rec.states.push_back(x0);
  rec.v.push_back(lyapunov_v(x0, system.equilibrium));
  const std::size_t dim = system.dimension();
  for (std::size_t t = 0; t < steps; ++t) {
    const State& x = rec.states.back();
    State delta = State::Zero(static_cast<Eigen::Index>(dim));
    if (system.delta_max > 0.0) delta = sample_ball(dim, system.delta_max, rng);
    State next = system.map(x) + delta;
    if (!next.allFinite()) {
      rec.aborted_at = t;
      rec.abort_reason = "non-finite state at step " + std::to_string(t + 1);
      break;
    }
    const double distance = std::sqrt(rec.v.back());
    rec.condition_met.push_back(system.delta_max > 0.0 &&
                                system.delta_max <= (1.0 - system.lipschitz) * distance);
    rec.perturbation.push_back(delta.norm());
    rec.v.push_back(lyapunov_v(next, system.equilibrium));
    rec.delta_v.push_back(rec.v.back() - rec.v[rec.v.size() - 2]);
    rec.states.push_back(std::move(next));
  }
  return rec;
}

std::string_view name(StepVerdict v) {
  switch (v) {
    case StepVerdict::Decrease: return "decrease";
    case StepVerdict::Violation: return "violation";
    case StepVerdict::ConditionNotMet: return "condition-not-met";
  }
  return "unknown";
}

double delta_v_bound(double lipschitz, double distance, double perturbation_norm) {
  return (lipschitz * lipschitz - 1.0) * distance * distance +
         2.0 * lipschitz * distance * perturbation_norm + perturbation_norm * perturbation_norm;
}

DecreaseReport check_decrease(const TrajectoryRecord& record, const DynSystem& system, double tolerance) {
  DecreaseReport rep;
  for (std::size_t t = 0; t < record.steps(); ++t) {
    const double dv = record.delta_v[t];
    const double bound = delta_v_bound(system.lipschitz, std::sqrt(record.v[t]), record.perturbation[t]);
    const double slack = tolerance * std::max({1.0, record.v[t], record.v[t + 1]});
    const bool holds = dv <= bound + slack;
    rep.bound_holds.push_back(holds);
    if (!holds) ++rep.bound_failures;
    if (!record.condition_met[t]) {
      rep.verdicts.push_back(StepVerdict::ConditionNotMet);
      ++rep.not_met;
      continue;
    }
    ++rep.condition_met;
    if (dv < 0.0) {
      rep.verdicts.push_back(StepVerdict::Decrease);
      ++rep.decreases;
    } else {
      rep.verdicts.push_back(StepVerdict::Violation);
      ++rep.violations;
    }
  }
  return rep;
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& record,
                          const DecreaseReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const Eigen::Index dim = record.states.empty() ? 0 : record.states.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << i;
  out << ",V,delta_V,perturbation_norm,condition_met,verdict,bound_holds\n";
  for (std::size_t t = 0; t < record.states.size(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << format_double(record.states[t](i));
    out << ',' << format_double(record.v[t]);
    if (t < record.steps()) {
      out << ',' << format_double(record.delta_v[t]) << ',' << format_double(record.perturbation[t]) << ','
          << (record.condition_met[t] ? 1 : 0) << ',';
      if (t < report.verdicts.size()) out << name(report.verdicts[t]);
      out << ',';
      if (t < report.bound_holds.size()) out << (report.bound_holds[t] ? 1 : 0);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing: " + path.string());
}

LipschitzEstimate estimate_lipschitz_from_images(const std::vector<State>& samples,
                                                 const std::vector<State>& images,
                                                 std::size_t pair_count, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("estimate_lipschitz: need at least two samples");
  if (images.size() != n) throw std::invalid_argument("estimate_lipschitz: one image per sample required");
  LipschitzEstimate est;
  auto visit = [&](std::size_t i, std::size_t j) {
    const double d = (samples[i] - samples[j]).norm();
    if (d == 0.0) return;
    est.lower_bound = std::max(est.lower_bound, (images[i] - images[j]).norm() / d);
    ++est.pairs;
  };
  const std::size_t all_pairs = n * (n - 1) / 2;
  if (pair_count >= all_pairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
    }
  } else {
    Rng rng(seed);
    for (std::size_t k = 0; k < pair_count; ++k) {
      const std::size_t i = rng() % n;
      std::size_t j = rng() % (n - 1);
      if (j >= i) ++j;
      visit(i, j);
    }
  }
  if (est.pairs == 0) {
    throw std::invalid_argument("estimate_lipschitz: no distinct sample pairs (all samples identical?)");
  }
  return est;
}

LipschitzEstimate estimate_lipschitz(const StateMap& map, const std::vector<State>& samples,
                                     std::size_t pair_count, std::uint64_t seed) {
  if (samples.size() < 2) throw std::invalid_argument("estimate_lipschitz: need at least two samples");
  std::vector<State> images;
  images.reserve(samples.size());
  for (const auto& s : samples) images.push_back(map(s));
  return estimate_lipschitz_from_images(samples, images, pair_count, seed);
}

namespace {

std::vector<State> rows_of(const Tensor& t) {
  std::vector<State> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    out.emplace_back(Eigen::Map<const State>(row.data(), static_cast<Eigen::Index>(row.size())));
  }
  return out;
}

}  // namespace

LipschitzEstimate estimate_cycle_lipschitz(const ModelPair& pair, const Tensor& x, std::size_t pair_count,
                                           std::uint64_t seed) {
  const auto [inner, recon] = cycle_predict(pair, x, CycleDirection::Forward);
  return estimate_lipschitz_from_images(rows_of(x), rows_of(recon), pair_count, seed);
}

SuiteResult run_suite(const SuiteConfig& config,
                      const std::function<void(std::size_t, const AffineSystem&, const TrajectoryRecord&,
                                               const DecreaseReport&)>& on_system) {
  if (config.systems == 0 || config.steps == 0 || config.dimension == 0) {
    throw std::invalid_argument("stability suite: systems, steps and dimension must be positive");
  }
  if (!(config.lipschitz_min >= 0.0 && config.lipschitz_min <= config.lipschitz_max &&
        config.lipschitz_max < 1.0)) {
    throw std::invalid_argument("stability suite: need 0 <= L_min <= L_max < 1");
  }
  if (!(config.delta_fraction >= 0.0)) throw std::invalid_argument("stability suite: delta fraction must be >= 0");
  if (config.split > config.dimension) throw std::invalid_argument("stability suite: split exceeds dimension");
  SuiteResult res;
  for (std::size_t k = 0; k < config.systems; ++k) {
    Rng rng(derive_seed(config.seed, k));
    const double lip = uniform(rng, config.lipschitz_min, config.lipschitz_max);
    AffineSystem sys = random_affine_contraction(config.dimension, lip, 0.0, rng());
    sys.system.split = config.split;
    const State x0 = sys.system.equilibrium + sample_ball(config.dimension, uniform(rng, 0.5, 2.0), rng);
    sys.system.delta_max = config.delta_fraction * (1.0 - lip) * (x0 - sys.system.equilibrium).norm();
    const TrajectoryRecord rec = simulate(sys.system, x0, config.steps, rng());
    const DecreaseReport rep = check_decrease(rec, sys.system);
    ++res.systems;
    res.steps += rec.steps();
    res.condition_met += rep.condition_met;
    res.decreases += rep.decreases;
    res.violations += rep.violations;
    res.not_met += rep.not_met;
    res.bound_failures += rep.bound_failures;
    if (rec.aborted_at) ++res.aborted;
    if (on_system) on_system(k, sys, rec, rep);
  }
  return res;
}

}  // namespace cyclereg::stability
