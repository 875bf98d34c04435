#include "ctmle/tmle.hpp"

namespace ctmle {

namespace {

Vector clamped_logit(const Vector& p) {
  return logit(p.cwiseMax(kQbarClamp).cwiseMin(1.0 - kQbarClamp));
}

}  // namespace

double clever_covariate(const PropensityFit& g, int a, Index i) {
  const double g1 = g.g1[static_cast<Eigen::Index>(i)];
  return a / g1 - (1 - a) / (1.0 - g1);
}

CleverCovariates clever_covariates(const Vector& g1, const Vector& a) {
  CleverCovariates h;
  h.treated = g1.cwiseInverse();
  h.control = -(1.0 - g1.array()).inverse().matrix();
  h.observed = (a.array() * h.treated.array() + (1.0 - a.array()) * h.control.array()).matrix();
  return h;
}

LogitQbar to_logit(const QbarValues& q) {
  return LogitQbar{clamped_logit(q.observed), clamped_logit(q.treated), clamped_logit(q.control)};
}

QbarValues to_probability(const LogitQbar& q) {
  return QbarValues{expit(q.observed), expit(q.treated), expit(q.control)};
}

LogitQbar apply_fluctuation(const LogitQbar& initial, const CleverCovariates& h, double epsilon) {
  return LogitQbar{initial.observed + epsilon * h.observed, initial.treated + epsilon * h.treated,
                   initial.control + epsilon * h.control};
}

Fluctuation fluctuate(const LogitQbar& initial, const CleverCovariates& h, const Vector& y) {
  Fluctuation f;
  f.epsilon = fit_epsilon(y, initial.observed, h.observed);
  f.updated = apply_fluctuation(initial, h, f.epsilon);
  f.loss = mean_nll(y, f.updated.observed);
  return f;
}

TargetedOutcomeModel target(const QbarValues& qbar0, const PropensityFit& g, const Dataset& ds) {
  const LogitQbar initial = to_logit(qbar0);
  const CleverCovariates h = clever_covariates(g.g1, ds.treatment());
  const Fluctuation f = fluctuate(initial, h, ds.outcome());

  TargetedOutcomeModel model;
  model.base = to_probability(initial);
  model.g = g;
  model.epsilon = f.epsilon;
  model.initial_loss = mean_nll(ds.outcome(), initial.observed);
  model.targeted_loss = f.loss;
  model.targeted = to_probability(f.updated);
  return model;
}

EstimateReport tmle_ate(const TargetedOutcomeModel& model, const Dataset& ds) {
  const double psi = gcomp(model.targeted);
  EstimateReport r = ic_inference(eic_values(model.targeted, model.g, psi, ds), psi);
  r.method = "tmle";
  r.diagnostics["epsilon"] = model.epsilon;
  r.diagnostics["ps_truncated"] = model.g.truncated_count;
  return r;
}

}  // namespace ctmle
