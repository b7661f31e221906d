#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cyclereg/model_pair.hpp"
#include "cyclereg/random.hpp"

namespace cyclereg::stability {

using State = Eigen::VectorXd;
using StateMap = std::function<State(const State&)>;

/// Perturbed discrete system X_{t+1} = F(X_t) + delta_t with ||delta_t|| <= delta_max.
/// The state is a flat vector; `split` records where the first block (x)
/// ends and the second (b) begins, for reporting only.
struct DynSystem {
  StateMap map;
  double lipschitz = 0.0;  // declared bound L, in [0, 1)
  State equilibrium;
  double delta_max = 0.0;
  std::size_t split = 0;

  std::size_t dimension() const { return static_cast<std::size_t>(equilibrium.size()); }
  /// Throws std::invalid_argument if L is outside [0, 1), delta_max < 0, the
  /// map is missing, or F(X*) differs from X* by more than `tolerance`.
  void validate(double tolerance = 1e-9) const;
};

/// Affine contraction X -> A X + c. A is a random matrix rescaled so its
/// spectral norm equals `lipschitz`; c is random and X* = (I - A)^{-1} c.
struct AffineSystem {
  Eigen::MatrixXd a;
  State c;
  DynSystem system;
};

AffineSystem random_affine_contraction(std::size_t dimension, double lipschitz, double delta_max,
                                       std::uint64_t seed);

/// Sample from the closed ball of the given radius, uniform in volume.
State sample_ball(std::size_t dimension, double radius, Rng& rng);

/// V(X) = ||X - X*||^2.
double lyapunov_v(const State& x, const State& equilibrium);

struct TrajectoryRecord {
  std::vector<State> states;          // X_0 .. X_T
  std::vector<double> v;              // V(X_t), one per state
  std::vector<double> delta_v;        // V(X_{t+1}) - V(X_t), one per step
  std::vector<double> perturbation;   // ||delta_t||, one per step
  std::vector<bool> condition_met;    // 0 < delta_max <= (1 - L) ||X_t - X*||
  std::optional<std::size_t> aborted_at;  // step whose result was non-finite
  std::string abort_reason;

  std::size_t steps() const { return delta_v.size(); }
};

/// Runs T steps. A non-finite state stops the run and records the step.
TrajectoryRecord simulate(const DynSystem& system, const State& x0, std::size_t steps, std::uint64_t seed);

enum class StepVerdict { Decrease, Violation, ConditionNotMet };
std::string_view name(StepVerdict v);

struct DecreaseReport {
  std::vector<StepVerdict> verdicts;
  std::vector<bool> bound_holds;  // the analytic upper bound on delta V at each step
  std::size_t condition_met = 0;
  std::size_t decreases = 0;
  std::size_t violations = 0;
  std::size_t not_met = 0;
  std::size_t bound_failures = 0;

  bool passed() const { return violations == 0 && bound_failures == 0; }
};

/// Upper bound on delta V: (L^2 - 1) e^2 + 2 L e d + d^2 with e = ||X_t - X*||, d = ||delta_t||.
double delta_v_bound(double lipschitz, double distance, double perturbation_norm);

/// Verdict per step: where the perturbation condition holds, delta V must be
/// negative; the bound must hold at every step (within `tolerance` relative
/// to V(X_t), for rounding).
DecreaseReport check_decrease(const TrajectoryRecord& record, const DynSystem& system,
                              double tolerance = 1e-12);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& record,
                          const DecreaseReport& report);

/// Empirical Lipschitz estimate: the largest ratio ||f(a) - f(b)|| / ||a - b||
/// over sampled distinct pairs. Always a lower bound on the true constant.
struct LipschitzEstimate {
  double lower_bound = 0.0;
  std::size_t pairs = 0;
};

/// Throws std::invalid_argument with fewer than two samples or when every
/// sample is identical.
LipschitzEstimate estimate_lipschitz(const StateMap& map, const std::vector<State>& samples,
                                     std::size_t pair_count, std::uint64_t seed);

/// Same estimate from precomputed images: images[i] = f(samples[i]).
LipschitzEstimate estimate_lipschitz_from_images(const std::vector<State>& samples,
                                                 const std::vector<State>& images,
                                                 std::size_t pair_count, std::uint64_t seed);

/// Estimate for the composition psi o phi on the rows of `x`.
LipschitzEstimate estimate_cycle_lipschitz(const ModelPair& pair, const Tensor& x,
                                           std::size_t pair_count, std::uint64_t seed);

/// Monte Carlo over many random affine contractions.
struct SuiteConfig {
  std::size_t systems = 1000;
  std::size_t dimension = 4;
  std::size_t split = 2;
  std::size_t steps = 50;
  double lipschitz_min = 0.05;
  double lipschitz_max = 0.95;
  /// delta_max as a fraction of (1 - L) ||X_0 - X*||. Values <= 1 respect
  /// the perturbation condition at the first step; larger values violate it.
  double delta_fraction = 0.5;
  std::uint64_t seed = 1;
};

struct SuiteResult {
  std::size_t systems = 0;
  std::size_t steps = 0;
  std::size_t condition_met = 0;
  std::size_t decreases = 0;
  std::size_t violations = 0;
  std::size_t not_met = 0;
  std::size_t bound_failures = 0;
  std::size_t aborted = 0;

  bool passed() const { return violations == 0 && bound_failures == 0 && aborted == 0; }
};

/// Runs the suite; `on_system` (optional) sees every system's record.
SuiteResult run_suite(const SuiteConfig& config,
                      const std::function<void(std::size_t, const AffineSystem&, const TrajectoryRecord&,
                                               const DecreaseReport&)>& on_system = {});

}  // namespace cyclereg::stability
