#include "cyclereg/objectives.hpp"

#include <string>

namespace cyclereg {

LossSettings LossSettings::from(const TrainingPlan& plan) {
  return {plan.loss,    plan.mapping_loss, plan.smooth_l1_threshold, plan.alpha_f,
          plan.alpha_b, plan.beta_f,       plan.beta_b};
}

namespace {

void require_paired(const Tensor& x, const Tensor& y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("paired objective: x has " + std::to_string(x.rows()) + " rows but y has " +
                     std::to_string(y.rows()));
  }
}

NodeId weighted(Tape& tape, NodeId term, double weight) {
  return weight == 1.0 ? term : tape.scale(term, weight);
}

// alpha * L(in - g(f(in))) [+ beta * l(in - g(f(g(f(in)))))]
NodeId jcm_half(Tape& tape, Mlp& first, Mlp& second, NodeId in, double alpha, double beta,
                const LossSettings& s, Mode mode, Rng* rng) {
  const NodeId once = second.forward(tape, first.forward(tape, in, mode, rng), mode, rng);
  NodeId out = weighted(tape, record_loss(tape, s.loss, once, in, s.smooth_threshold), alpha);
  if (beta != 0.0) {
    const NodeId twice = second.forward(tape, first.forward(tape, once, mode, rng), mode, rng);
    const NodeId mapping = record_loss(tape, s.mapping_loss, twice, in, s.smooth_threshold);
    out = tape.add(out, weighted(tape, mapping, beta));
  }
  return out;
}

double jcm_half_value(const Mlp& first, const Mlp& second, const Tensor& in, double alpha,
                      double beta, const LossSettings& s) {
  const Tensor once = second.predict(first.predict(in));
  double v = alpha * loss_eval(s.loss, once, in, s.smooth_threshold);
  if (beta != 0.0) {
    const Tensor twice = second.predict(first.predict(once));
    v += beta * loss_eval(s.mapping_loss, twice, in, s.smooth_threshold);
  }
  return v;
}

}  // namespace

ObjectiveNodes record_objective(Strategy strategy, Tape& tape, ModelPair& pair, NodeId x, NodeId y,
                                const LossSettings& s, Terms terms, Mode mode, Rng* rng) {
  const bool want_f = terms != Terms::BackwardOnly;
  const bool want_b = terms != Terms::ForwardOnly;
  ObjectiveNodes out;

  if (strategy == Strategy::Jcm) {
    if (want_f) out.forward = jcm_half(tape, pair.phi(), pair.psi(), x, s.alpha_f, s.beta_f, s, mode, rng);
    if (want_b) out.backward = jcm_half(tape, pair.psi(), pair.phi(), y, s.alpha_b, s.beta_b, s, mode, rng);
    return out;
  }

  require_paired(tape.value(x), tape.value(y));
  if (want_f) {
    const NodeId y_hat = pair.phi().forward(tape, x, mode, rng);
    out.forward = record_loss(tape, s.loss, y_hat, y, s.smooth_threshold);
  }
  if (!want_b) return out;

  const NodeId x_hat = pair.psi().forward(tape, y, mode, rng);
  switch (strategy) {
    case Strategy::Baseline:
      out.backward = record_loss(tape, s.loss, x_hat, x, s.smooth_threshold);
      break;
    case Strategy::Ucm: {
      const NodeId y_rec = pair.phi().forward_frozen(tape, x_hat);
      out.backward = record_loss(tape, s.loss, y_rec, y, s.smooth_threshold);
      break;
    }
    case Strategy::UcmHybrid: {
      const NodeId y_rec = pair.phi().forward_frozen(tape, x_hat);
      out.backward_cycle = record_loss(tape, s.loss, y_rec, y, s.smooth_threshold);
      out.backward_direct = record_loss(tape, s.loss, x_hat, x, s.smooth_threshold);
      out.backward = tape.scale(tape.add(*out.backward_cycle, *out.backward_direct), 0.5);
      break;
    }
    case Strategy::Jcm:
      break;
  }
  return out;
}

LossValues loss_baseline(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                         double thr) {
  require_paired(x, y);
  LossValues v;
  v.forward = loss_eval(kind, pair.phi().predict(x), y, thr);
  v.backward = loss_eval(kind, pair.psi().predict(y), x, thr);
  v.total = 0.5 * (v.forward + v.backward);
  return v;
}

LossValues loss_ucm(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                    double thr) {
  require_paired(x, y);
  LossValues v;
  v.forward = loss_eval(kind, pair.phi().predict(x), y, thr);
  v.backward = loss_eval(kind, pair.phi().predict(pair.psi().predict(y)), y, thr);
  v.total = 0.5 * (v.forward + v.backward);
  return v;
}

LossValues loss_ucm_hybrid(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                           double thr) {
  require_paired(x, y);
  LossValues v;
  v.forward = loss_eval(kind, pair.phi().predict(x), y, thr);
  const Tensor x_hat = pair.psi().predict(y);
  const double cycle = loss_eval(kind, pair.phi().predict(x_hat), y, thr);
  const double direct = loss_eval(kind, x_hat, x, thr);
  v.backward = 0.5 * (cycle + direct);
  v.total = 0.5 * (v.forward + v.backward);
  return v;
}

LossValues loss_jcm(const ModelPair& pair, const Tensor& x, const Tensor& y, const LossSettings& s) {
  LossValues v;
  v.forward = jcm_half_value(pair.phi(), pair.psi(), x, s.alpha_f, s.beta_f, s);
  v.backward = jcm_half_value(pair.psi(), pair.phi(), y, s.alpha_b, s.beta_b, s);
  v.total = 0.5 * (v.forward + v.backward);
  return v;
}

LossValues evaluate_objective(Strategy strategy, const ModelPair& pair, const Tensor& x,
                              const Tensor& y, const LossSettings& s) {
  switch (strategy) {
    case Strategy::Baseline: return loss_baseline(pair, x, y, s.loss, s.smooth_threshold);
    case Strategy::Ucm: return loss_ucm(pair, x, y, s.loss, s.smooth_threshold);
    case Strategy::UcmHybrid: return loss_ucm_hybrid(pair, x, y, s.loss, s.smooth_threshold);
    case Strategy::Jcm: return loss_jcm(pair, x, y, s);
  }
  return {};
}

}  // namespace cyclereg
