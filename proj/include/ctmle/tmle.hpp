#pragma once

#include "ctmle/estimators.hpp"

namespace ctmle {

/// Initial predictions are clamped to [kQbarClamp, 1 - kQbarClamp] before logit.
inline constexpr double kQbarClamp = 1e-6;

/// H_g(a, W_i) = a / g(1 | W_i) - (1 - a) / g(0 | W_i).
double clever_covariate(const PropensityFit& g, int a, Index i);

struct CleverCovariates {
  Vector observed;  // H(A_i, W_i)
  Vector treated;   // H(1, W_i)
  Vector control;   // H(0, W_i)
};

CleverCovariates clever_covariates(const Vector& g1, const Vector& a);

/// Outcome regression on the logit scale.
struct LogitQbar {
  Vector observed;
  Vector treated;
  Vector control;
};

LogitQbar to_logit(const QbarValues& q);
QbarValues to_probability(const LogitQbar& q);

struct Fluctuation {
  double epsilon = 0.0;
  double loss = 0.0;  // mean negative log-likelihood of the update
  LogitQbar updated;
};

/// One logistic fluctuation of `initial` along `h`, fitted on `y`.
Fluctuation fluctuate(const LogitQbar& initial, const CleverCovariates& h, const Vector& y);

/// Applies a fitted epsilon to other rows.
LogitQbar apply_fluctuation(const LogitQbar& initial, const CleverCovariates& h, double epsilon);

struct TargetedOutcomeModel {
  QbarValues base;
  PropensityFit g;
  double epsilon = 0.0;
  double initial_loss = 0.0;
  double targeted_loss = 0.0;
  QbarValues targeted;
};

TargetedOutcomeModel target(const QbarValues& qbar0, const PropensityFit& g, const Dataset& ds);

/// Substitution estimate with influence-curve inference, on the scale of ds.
EstimateReport tmle_ate(const TargetedOutcomeModel& model, const Dataset& ds);

}  // namespace ctmle
