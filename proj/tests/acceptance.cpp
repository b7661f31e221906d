// Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned
// below. Training criteria use the desk configuration (see desk_config).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "cyclereg/experiment.hpp"
#include "cyclereg/stability.hpp"
#include "test_util.hpp"

using namespace cyclereg;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ---------------------------------------------------------

constexpr double kGradRelTol = 1e-4;
constexpr int kGradConfigs = 100;

constexpr double kC2MaxForward = 0.02;
constexpr double kC2MinBackward = 0.3;
constexpr double kC2MinRatio = 10.0;
constexpr double kC3MinImprovement = 30.0;
constexpr double kC4MaxRatio = 2.0;
constexpr double kC5ForwardFactor = 1.2 + 0.10;
constexpr double kC5BackwardFactor = 1.4 + 0.10;
constexpr double kC6aFactor = 2.0;
constexpr std::size_t kC6bMinWorse = 7;
constexpr double kC8MaxCycle = 0.005;
constexpr double kC9DecayTol = 1e-9;
constexpr double kC11RoundTripTol = 1e-12;

constexpr std::size_t kSeeds = 10;

const std::vector<TaskId> kTasks = {TaskId::XSquared, TaskId::XSquaredSin, TaskId::SinExpCubic};

// ---- output ------------------------------------------------------------------

int failures = 0;

void verdict(int id, bool pass, const std::string& title, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " C" << id << " " << title << ": " << detail << std::endl;
}

std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double median_of(std::vector<double> v) { return v.empty() ? std::nan("") : median(std::move(v)); }

// ---- desk experiments -----------------------------------------------------------

/// Reduced-cost setting for the training criteria: 2 x 32 relu networks
/// without batchnorm, 40 epochs, 20,000 samples, 10 seeds.
ExperimentConfig desk_config(TaskId task) {
  ExperimentConfig c;
  c.data.task = task;
  c.data.n = 20000;
  for (auto* m : {&c.phi, &c.psi}) {
    m->hidden = {32, 32};
    m->activation = Activation::Relu;
    m->batchnorm = false;
  }
  c.plan.epochs = 40;
  c.plan.optimizer.learning_rate = 1e-3;
  c.plan.batch_fraction = 0.02;
  return c;
}

struct RunKey {
  TaskId task;
  Strategy strategy;
  UpdateMode mode;
  double fraction;
  std::uint64_t seed;
  auto operator<=>(const RunKey&) const = default;
};

class Runs {
 public:
  explicit Runs(bool verbose) : verbose_(verbose) {}

  const MetricsReport& get(TaskId task, Strategy s, std::uint64_t seed, UpdateMode mode = UpdateMode::Simultaneous,
                           double fraction = 0.02) {
    const RunKey key{task, s, mode, fraction, seed};
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ExperimentConfig c = desk_config(task);
    c.plan.strategy = s;
    c.plan.update_mode = mode;
    c.plan.batch_fraction = fraction;
    c.plan.seed = seed;
    c.validate();
    auto data = data_.find(task);
    if (data == data_.end()) data = data_.emplace(task, prepare_data(c)).first;
    const auto t0 = std::chrono::steady_clock::now();
    MetricsReport r = run_experiment(c, data->second).report;
    if (verbose_) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "  run " << name(task) << " " << name(s) << " " << name(mode) << " " << fraction << " seed "
                << seed << ": fwd " << (r.forward_error ? fmt(*r.forward_error) : "n/a") << " bwd "
                << (r.backward_error ? fmt(*r.backward_error) : "n/a") << " (" << fmt(secs, 3) << " s)\n";
    }
    return cache_.emplace(key, std::move(r)).first->second;
  }

  std::vector<const MetricsReport*> seeds(TaskId task, Strategy s, UpdateMode mode = UpdateMode::Simultaneous,
                                          double fraction = 0.02) {
    std::vector<const MetricsReport*> out;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) out.push_back(&get(task, s, seed, mode, fraction));
    return out;
  }

 private:
  bool verbose_;
  std::map<RunKey, MetricsReport> cache_;
  std::map<TaskId, PreparedData> data_;
};

// ---- C1 ----------------------------------------------------------------------

using testing::random_away_from;
using testing::random_tensor;
using testing::worst_gradient_error;

NodeId against(Tape& t, NodeId out, const Tensor& target) {
  return t.reduce_mean(t.square(t.subtract(out, t.constant(target))));
}

void criterion_gradients() {
  Rng rng(2024);
  double worst = 0.0;
  std::size_t configs = 0;
  auto dim = [&] { return std::size_t{1} + rng() % 4; };
  auto record = [&](double err) {
    worst = std::max(worst, err);
    ++configs;
  };
  for (int k = 0; k < kGradConfigs; ++k) {
    const std::size_t n = 2 + rng() % 5, m = dim(), p = dim();
    const Tensor c = random_tensor({n, p}, rng);
    record(worst_gradient_error({random_tensor({n, m}, rng), random_tensor({m, p}, rng), random_tensor({1, p}, rng)},
                                [&](Tape& t, const std::vector<NodeId>& in) {
                                  return against(t, t.add_bias(t.matmul(in[0], in[1]), in[2]), c);
                                }));
    record(worst_gradient_error({random_away_from({n, p}, rng, {0.0}, 1e-4)},
                                [&](Tape& t, const std::vector<NodeId>& in) { return against(t, t.relu(in[0]), c); }));
    record(worst_gradient_error({random_tensor({n, p}, rng, -2, 2)},
                                [&](Tape& t, const std::vector<NodeId>& in) { return against(t, t.tanh(in[0]), c); }));
    record(worst_gradient_error(
        {random_tensor({n, p}, rng, -2, 2), random_tensor({1, p}, rng, 0.5, 2), random_tensor({1, p}, rng)},
        [&](Tape& t, const std::vector<NodeId>& in) {
          BatchNormState st = BatchNormState::fresh(p);
          return against(t, t.tanh(t.batchnorm(in[0], in[1], in[2], st, Mode::Training)), c);
        }));
    BatchNormState running = BatchNormState::fresh(p);
    running.running_var = random_tensor({1, p}, rng, 0.2, 2);
    record(worst_gradient_error(
        {random_tensor({n, p}, rng), random_tensor({1, p}, rng, 0.5, 2), random_tensor({1, p}, rng)},
        [&](Tape& t, const std::vector<NodeId>& in) {
          return against(t, t.batchnorm_inference(in[0], in[1], in[2], running), c);
        }));
    const std::uint64_t mask = rng();
    record(worst_gradient_error({random_tensor({n, p}, rng)}, [&](Tape& t, const std::vector<NodeId>& in) {
      Rng r(mask);
      return against(t, t.dropout(in[0], 0.3, Mode::Training, r), c);
    }));
    const double s = uniform(rng, -3, 3);
    record(worst_gradient_error({random_tensor({n, p}, rng), random_tensor({n, p}, rng)},
                                [&](Tape& t, const std::vector<NodeId>& in) {
                                  return against(t, t.add(t.subtract(in[0], t.scale(in[1], s)), in[1]), c);
                                }));
    record(worst_gradient_error({random_away_from({n, p}, rng, {0.0}, 1e-4)},
                                [&](Tape& t, const std::vector<NodeId>& in) { return against(t, t.abs(in[0]), c); }));
    record(worst_gradient_error({random_away_from({n, p}, rng, {-1.0, 1.0}, 1e-4, -3, 3)},
                                [&](Tape& t, const std::vector<NodeId>& in) {
                                  return t.reduce_mean(t.smooth_l1(in[0], 1.0));
                                }));
  }

  // Full objectives of every strategy, with every loss kind, on tanh networks.
  std::size_t composed = 0;
  double worst_composed = 0.0;
  for (auto strategy : {Strategy::Baseline, Strategy::Ucm, Strategy::UcmHybrid, Strategy::Jcm}) {
    for (int k = 0; k < 30; ++k) {
      const LossKind kind = std::array{LossKind::L2, LossKind::L1, LossKind::SmoothL1}[k % 3];
      ModelPair pair(MlpSpec::chain(1, {5}, 2, Activation::Tanh, false, false, rng()),
                     MlpSpec::chain(2, {5}, 1, Activation::Tanh, false, false, rng()));
      const Tensor x = random_tensor({6, 1}, rng), y = random_tensor({6, 2}, rng);
      LossSettings ls;
      ls.loss = ls.mapping_loss = kind;
      ls.alpha_f = uniform(rng, 1, 3);
      ls.alpha_b = uniform(rng, 1, 3);
      ls.beta_f = uniform(rng, 0, 1);
      ls.beta_b = uniform(rng, 0, 1);
      for (auto terms : {Terms::ForwardOnly, Terms::BackwardOnly}) {
        Tape tape;
        const auto nodes =
            record_objective(strategy, tape, pair, tape.constant(x), tape.constant(y), ls, terms, Mode::Training);
        const Gradients g = tape.backward(terms == Terms::ForwardOnly ? *nodes.forward : *nodes.backward);
        std::vector<const Mlp*> trained;
        if (strategy == Strategy::Jcm) trained = {&pair.phi(), &pair.psi()};
        else trained = {terms == Terms::ForwardOnly ? &pair.phi() : &pair.psi()};
        for (const Mlp* net : trained) {
          for (std::size_t i = 0; i < net->parameters().size(); ++i) {
            const ParamId id = net->id(i);
            const Tensor numeric = finite_diff_gradient(
                [&](const Tensor& p) {
                  ModelPair copy = pair;
                  copy.owner(id).parameter(id) = p;
                  const auto v = evaluate_objective(strategy, copy, x, y, ls);
                  return terms == Terms::ForwardOnly ? v.forward : v.backward;
                },
                net->parameter(id));
            worst_composed = std::max(worst_composed, relative_error(g.at(id), numeric, 1e-6));
          }
        }
      }
      ++composed;
    }
  }
  const bool pass = worst < kGradRelTol && worst_composed < kGradRelTol && composed >= 100;
  verdict(1, pass, "gradient correctness",
          std::to_string(configs) + " primitive checks (worst rel err " + fmt(worst, 3) + "), " +
              std::to_string(composed) + " composed-loss configs over 4 strategies (worst " +
              fmt(worst_composed, 3) + "), tolerance " + fmt(kGradRelTol));
}

// ---- C2..C8 -----------------------------------------------------------------------

std::vector<double> values(const std::vector<const MetricsReport*>& rs, std::optional<double> MetricsReport::*field) {
  std::vector<double> out;
  for (const auto* r : rs)
    if (!r->diverged && (r->*field)) out.push_back(*(r->*field));
  return out;
}

void criterion_mean_collapse(Runs& runs) {
  const auto rs = runs.seeds(TaskId::XSquared, Strategy::Baseline);
  const double fwd = median_of(values(rs, &MetricsReport::forward_error));
  const double bwd = median_of(values(rs, &MetricsReport::backward_error));
  const double ratio = median_of(values(rs, &MetricsReport::ratio));
  const bool pass = fwd <= kC2MaxForward && bwd >= kC2MinBackward && ratio >= kC2MinRatio;
  verdict(2, pass, "mean collapse of baseline on y=x^2",
          "median forward MAE " + fmt(fwd) + " (<= " + fmt(kC2MaxForward) + "), median backward MAE " + fmt(bwd) +
              " (>= " + fmt(kC2MinBackward) + "), median ratio " + fmt(ratio) + " (>= " + fmt(kC2MinRatio) + ")");
}

void criterion_ucm_improvement(Runs& runs) {
  bool pass = true;
  std::string detail;
  for (TaskId task : kTasks) {
    std::vector<double> improvements;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      const auto& b = runs.get(task, Strategy::Baseline, seed);
      const auto& u = runs.get(task, Strategy::Ucm, seed);
      if (b.backward_error && u.backward_error && *b.backward_error > 0)
        improvements.push_back(improvement_vs_baseline(*u.backward_error, *b.backward_error));
    }
    const double med = median_of(improvements);
    pass = pass && improvements.size() == kSeeds && med >= kC3MinImprovement;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(name(task)) + " " + fmt(med, 3) + "%";
  }
  verdict(3, pass, "UCM backward improvement over baseline",
          "median improvement " + detail + " (>= " + fmt(kC3MinImprovement) + "%)");
}

// Average ranks, ties sharing the mean rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  return cov / std::sqrt(va * vb);
}

void criterion_ucm_coupling(Runs& runs) {
  bool pass = true;
  std::string detail;
  std::vector<double> fwd, bwd;
  for (TaskId task : kTasks) {
    const auto rs = runs.seeds(task, Strategy::Ucm);
    const double med = median_of(values(rs, &MetricsReport::ratio));
    pass = pass && med <= kC4MaxRatio;
    detail += std::string(name(task)) + " " + fmt(med, 3) + ", ";
    for (const auto* r : rs) {
      if (r->diverged || !r->forward_error || !r->backward_error) continue;
      fwd.push_back(*r->forward_error);
      bwd.push_back(*r->backward_error);
    }
  }
  const double rho = fwd.size() >= 2 ? spearman(fwd, bwd) : std::nan("");
  pass = pass && fwd.size() >= 20 && rho > 0.0;
  verdict(4, pass, "UCM backward error follows forward error",
          "median backward/forward ratio " + detail + "(<= " + fmt(kC4MaxRatio) + "); Spearman rho " + fmt(rho, 3) +
              " over " + std::to_string(fwd.size()) + " runs (> 0)");
}

void criterion_jcm_bounds(Runs& runs) {
  bool pass = true;
  std::string detail;
  for (TaskId task : kTasks) {
    std::size_t converged = 0, fwd_ok = 0, bwd_ok = 0;
    double worst_fwd = 0.0, worst_bwd = 0.0;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      const auto& j = runs.get(task, Strategy::Jcm, seed);
      const auto& b = runs.get(task, Strategy::Baseline, seed);
      if (j.diverged || !j.forward_error || !j.backward_error || !b.forward_direct_mae) continue;
      ++converged;
      // Forward reconstruction lives in X, backward reconstruction in Y; both
      // are held against the matched baseline's direct regression error.
      const double ref = *b.forward_direct_mae;
      const double rf = *j.forward_error / ref, rb = *j.backward_error / ref;
      worst_fwd = std::max(worst_fwd, rf);
      worst_bwd = std::max(worst_bwd, rb);
      fwd_ok += rf <= kC5ForwardFactor;
      bwd_ok += rb <= kC5BackwardFactor;
    }
    pass = pass && converged > 0 && fwd_ok == converged && bwd_ok == converged;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(name(task)) + ": converged " +
              std::to_string(converged) + "/" + std::to_string(kSeeds) + ", worst fwd ratio " + fmt(worst_fwd, 3) +
              ", worst bwd ratio " + fmt(worst_bwd, 3);
  }
  verdict(5, pass, "JCM reconstruction within bounds of baseline direct error",
          detail + " (limits " + fmt(kC5ForwardFactor) + " / " + fmt(kC5BackwardFactor) + ")");
}

void criterion_failure_protocols(Runs& runs) {
  // (a) hybrid backward task: direct + cycle in one step vs in two steps.
  const auto sim = runs.seeds(TaskId::XSquared, Strategy::UcmHybrid, UpdateMode::Simultaneous);
  const auto step = runs.seeds(TaskId::XSquared, Strategy::UcmHybrid, UpdateMode::Stepwise);
  std::size_t sim_diverged = 0;
  for (const auto* r : sim) sim_diverged += r->diverged;
  const double sim_med = median_of(values(sim, &MetricsReport::backward_cycle_mae));
  const double step_med = median_of(values(step, &MetricsReport::backward_cycle_mae));
  const bool a = sim_diverged * 2 > kSeeds || sim_med >= kC6aFactor * step_med;
  verdict(6, a, "(a) simultaneous direct+cycle update of psi fails on y=x^2",
          "median backward cycle MAE simultaneous " + fmt(sim_med) + " vs stepwise " + fmt(step_med) + " (factor " +
              fmt(sim_med / step_med, 3) + ", need >= " + fmt(kC6aFactor) + "), simultaneous diverged " +
              std::to_string(sim_diverged) + "/" + std::to_string(kSeeds));

  // (b) JCM: alternating model updates vs one joint update.
  std::size_t worse = 0;
  std::vector<double> lsim, lstep;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const auto& s = runs.get(TaskId::XSquared, Strategy::Jcm, seed);
    const auto& w = runs.get(TaskId::XSquared, Strategy::Jcm, seed, UpdateMode::Stepwise);
    const double ls = s.final_total_loss.value_or(INFINITY), lw = w.final_total_loss.value_or(INFINITY);
    if (!s.diverged && (w.diverged || lw > ls)) ++worse;
    lsim.push_back(ls);
    lstep.push_back(lw);
  }
  verdict(6, worse >= kC6bMinWorse, "(b) JCM stepwise ends worse than simultaneous on y=x^2",
          "stepwise final L_total higher in " + std::to_string(worse) + "/" + std::to_string(kSeeds) +
              " matched seeds (need >= " + std::to_string(kC6bMinWorse) + "); medians " + fmt(median_of(lstep)) +
              " vs " + fmt(median_of(lsim)));
}

void criterion_batch_size(Runs& runs) {
  struct Cell {
    double fraction;
    std::size_t diverged = 0;
    double loss = 0.0;
  };
  std::vector<Cell> cells;
  for (double f : {0.02, 0.1, 0.25, 0.45}) {
    Cell c{f};
    std::vector<double> losses;
    for (const auto* r : runs.seeds(TaskId::XSquared, Strategy::Jcm, UpdateMode::Simultaneous, f)) {
      c.diverged += r->diverged;
      losses.push_back(r->diverged ? INFINITY : r->final_total_loss.value_or(INFINITY));
    }
    c.loss = median_of(losses);
    cells.push_back(c);
  }
  const Cell& big = cells.back();
  bool pass = true;
  std::string detail;
  for (const Cell& c : cells) {
    detail += "fraction " + fmt(c.fraction) + ": diverged " + std::to_string(c.diverged) + "/" +
              std::to_string(kSeeds) + ", median final L_total " + fmt(c.loss) + "; ";
    if (c.fraction <= 0.1) pass = pass && (big.diverged > c.diverged || big.loss > c.loss);
  }
  verdict(7, pass, "JCM degrades at batch fraction 0.45", detail + "0.45 must be strictly worse than 0.02 and 0.1");
}

void criterion_best_case(Runs& runs) {
  double best = INFINITY;
  TaskId best_task = kTasks.front();
  std::string detail;
  for (TaskId task : kTasks) {
    const double med = median_of(values(runs.seeds(task, Strategy::Ucm), &MetricsReport::backward_error));
    detail += std::string(name(task)) + " " + fmt(med) + ", ";
    if (med < best) {
      best = med;
      best_task = task;
    }
  }
  verdict(8, best <= kC8MaxCycle, "best UCM backward cycle MAE",
          "median per task: " + detail + "best " + std::string(name(best_task)) + " " + fmt(best) + " (<= " +
              fmt(kC8MaxCycle) +
              "; the headline figure of 0.003 and the tabulated best entry of 0.00305 for y=x^2 sin(x) disagree, "
              "the desk threshold is relaxed from both)");
}

// ---- C9 ----------------------------------------------------------------------------

void criterion_lyapunov() {
  stability::SuiteConfig cfg;
  cfg.systems = 1000;
  const auto r = stability::run_suite(cfg);

  double worst_excess = -INFINITY;
  std::size_t checked = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(derive_seed(99, s));
    const double L = uniform(rng, cfg.lipschitz_min, cfg.lipschitz_max);
    const auto sys = stability::random_affine_contraction(cfg.dimension, L, 0.0, rng());
    const stability::State x0 = sys.system.equilibrium + stability::sample_ball(cfg.dimension, 5.0, rng);
    const auto rec = stability::simulate(sys.system, x0, cfg.steps, rng());
    for (std::size_t t = 0; t < rec.v.size(); ++t) {
      worst_excess = std::max(worst_excess, rec.v[t] - std::pow(L, 2.0 * static_cast<double>(t)) * rec.v[0]);
      ++checked;
    }
  }
  const bool pass = r.passed() && r.condition_met > 0 && worst_excess <= kC9DecayTol;
  verdict(9, pass, "Lyapunov decrease on perturbed contractions",
          std::to_string(r.systems) + " systems, " + std::to_string(r.condition_met) + " condition-met steps, " +
              std::to_string(r.violations) + " with dV >= 0, " + std::to_string(r.bound_failures) +
              " bound failures over " + std::to_string(r.steps) + " steps; unperturbed V_t - L^(2t) V_0 <= " +
              fmt(worst_excess, 3) + " over " + std::to_string(checked) + " states (tol " + fmt(kC9DecayTol) + ")");
}

// ---- C10 ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CYCLEREG_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "cyclereg_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> commands = {
      "gen-data --task spring --n 500 --seed 3",
      "stability --systems 50 --trajectories 1",
  };
  for (const char* s : {"baseline", "ucm", "ucm_hybrid --update-mode stepwise", "jcm --beta-f 0.5 --beta-b 0.5"}) {
    commands.push_back(std::string("train --task x_squared_sin --n 2000 --epochs 4 --batch-fraction 0.05 --strategy ") +
                       s);
  }
  // Each command runs twice with an identical command line, including the
  // output directory; the first run's files are snapshotted in between.
  auto snapshot = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string file = entry.path().filename().string();
      if (file != "timing.csv") files[file] = slurp(entry.path());  // wall-clock times only
    }
    return files;
  };
  std::size_t files = 0, mismatches = 0, bad_exit = 0;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const fs::path dir = root / ("run" + std::to_string(i));
    bad_exit += run_cli(commands[i] + " -o " + dir.string()) != 0;
    const auto first = snapshot(dir);
    bad_exit += run_cli(commands[i] + " -o " + dir.string()) != 0;
    const auto second = snapshot(dir);
    files += first.size();
    for (const auto& [file, bytes] : first) mismatches += !second.count(file) || second.at(file) != bytes;
  }
  // Re-evaluating a checkpoint is also reproducible.
  const std::string eval = "eval --checkpoint " + (root / "run2" / "checkpoint.bin").string() + " -o " +
                           (root / "eval").string();
  bad_exit += run_cli(eval) != 0;
  const auto first = snapshot(root / "eval");
  bad_exit += run_cli(eval) != 0;
  files += first.size();
  mismatches += snapshot(root / "eval") != first;
  fs::remove_all(root);
  verdict(10, mismatches == 0 && bad_exit == 0 && files > commands.size(), "determinism",
          std::to_string(commands.size() + 1) + " commands run twice, " + std::to_string(files) +
              " output files compared, " + std::to_string(mismatches) + " differ, " + std::to_string(bad_exit) +
              " nonzero exits");
}

// ---- C11 ---------------------------------------------------------------------------

std::vector<std::vector<double>> sorted_rows(const Tensor& t) {
  std::vector<std::vector<double>> rows(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) rows[r].push_back(t.at(r, c));
  std::sort(rows.begin(), rows.end());
  return rows;
}

void criterion_data_pipeline() {
  Rng rng(11);
  double worst = 0.0;
  std::size_t split_bad = 0, decouple_bad = 0, trials = 0;
  for (int k = 0; k < 100; ++k, ++trials) {
    const TaskId task = all_tasks()[rng() % all_tasks().size()];
    const std::size_t n = 20 + rng() % 500;
    const Dataset d = gen_synthetic(task, n, default_ranges(task), rng());
    const auto [norm, stats] = normalize(d);
    const Dataset back = denormalize(norm, stats);
    for (std::size_t i = 0; i < d.x.size(); ++i) worst = std::max(worst, std::abs(back.x[i] - d.x[i]));
    for (std::size_t i = 0; i < d.y.size(); ++i) worst = std::max(worst, std::abs(back.y[i] - d.y[i]));

    const Splits s = split_shuffle(d, SplitSpec{0.8, 0.1, 0.1, rng()});
    std::vector<std::size_t> all;
    for (const auto* rows : {&s.train_rows, &s.validation_rows, &s.test_rows}) all.insert(all.end(), rows->begin(), rows->end());
    std::sort(all.begin(), all.end());
    bool ok = all.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = all[i] == i;
    split_bad += !ok;

    const Dataset u = decouple_pairs(s.train, rng());
    decouple_bad += sorted_rows(u.x) != sorted_rows(s.train.x) || sorted_rows(u.y) != sorted_rows(s.train.y);
  }
  const bool pass = worst <= kC11RoundTripTol && split_bad == 0 && decouple_bad == 0;
  verdict(11, pass, "data pipeline properties",
          std::to_string(trials) + " random datasets: normalization round trip max error " + fmt(worst, 3) +
              " (tol " + fmt(kC11RoundTripTol) + "), " + std::to_string(split_bad) +
              " non-partitioning splits, " + std::to_string(decouple_bad) + " decouplings that changed a marginal");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--only", only, "criteria to run, e.g. --only 1,9")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "print every training run to stderr");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  Runs runs(verbose);
  if (want(1)) criterion_gradients();
  if (want(2)) criterion_mean_collapse(runs);
  if (want(3)) criterion_ucm_improvement(runs);
  if (want(4)) criterion_ucm_coupling(runs);
  if (want(5)) criterion_jcm_bounds(runs);
  if (want(6)) criterion_failure_protocols(runs);
  if (want(7)) criterion_batch_size(runs);
  if (want(8)) criterion_best_case(runs);
  if (want(9)) criterion_lyapunov();
  if (want(10)) criterion_determinism();
  if (want(11)) criterion_data_pipeline();
  return failures == 0 ? 0 : 1;
}
