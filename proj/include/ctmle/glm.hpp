#pragma once

#include "ctmle/data.hpp"

namespace ctmle {

struct LogisticOptions {
  double tolerance = 1e-8;      // on max |score|
  int max_iterations = 50;
  double coefficient_cap = 30.0;
};

/// Fitted (quasi-)binomial logistic model. With an intercept, coefficient 0
/// is the intercept and coefficient j+1 multiplies design column j.
struct LogisticFit {
  Vector coefficients;
  bool intercept = true;
  bool converged = false;
  bool rank_deficient = false;
  bool capped = false;
  int iterations = 0;
  double max_abs_score = 0.0;
};

/// IRLS fit of y in [0,1] on X. `offset` may be empty (no offset); `start`
/// may be empty (zeros) or carry a warm start of the full coefficient size.
LogisticFit fit_logistic(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                         const LogisticOptions& options = {}, const Vector& start = Vector());

inline LogisticFit fit_logistic(const Matrix& X, const Vector& y, bool intercept = true,
                                const LogisticOptions& options = {}) {
  return fit_logistic(X, y, Vector(), intercept, options);
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

Vector expit(const Vector& eta);
Vector logit(const Vector& p);

/// Logistic fit with intercept whose design grows by appended columns.
/// The Cholesky factor of the Hessian is bordered for each new column, so
/// an extension costs O(n d) per iteration; the Hessian is rebuilt only when
/// the reused one converges slowly. Converges to the same score tolerance
/// as fit_logistic, which it falls back to when the bordering breaks down.
class GrowingLogistic {
 public:
  /// Intercept-only fit of y.
  explicit GrowingLogistic(const Vector& y, LogisticOptions options = {});

  /// Fit on the current design plus `extra`; `*this` is left unchanged.
  GrowingLogistic extend(const Matrix& extra, const Vector& y) const;

  const Vector& coefficients() const { return fit_.coefficients; }
  const LogisticFit& fit() const { return fit_; }
  /// Fitted probabilities on the training rows.
  Vector fitted() const { return expit(eta_); }

 private:
  GrowingLogistic() = default;
  void refactor();

  LogisticOptions options_;
  Matrix design_;  // leading column of ones
  Vector eta_;
  Matrix chol_;    // lower factor of the Hessian used last
  bool have_factor_ = false;
  LogisticFit fit_;
};

Vector linear_predictor(const LogisticFit& fit, const Matrix& X, const Vector& offset = Vector());
Vector predict_proba(const LogisticFit& fit, const Matrix& X, const Vector& offset = Vector());

/// Quasi-binomial log-likelihood sum_i y_i*eta_i - log(1 + exp(eta_i)).
double log_likelihood(const Vector& y, const Vector& eta);

/// Mean negative log-likelihood of predictions given on the logit scale.
double mean_nll(const Vector& y, const Vector& eta);

/// Score vector X'(y - p) of the model at `coefficients`.
Vector logistic_score(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                      const Vector& coefficients);

double logistic_loglik(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                       const Vector& coefficients);

/// No-intercept offset logistic regression of y on the single covariate h.
/// Returns the maximizer of the likelihood over epsilon.
double fit_epsilon(const Vector& y, const Vector& offset, const Vector& h);


}  // namespace ctmle
