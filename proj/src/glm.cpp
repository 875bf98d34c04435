#include "ctmle/glm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmle {

namespace {

// log(1 + exp(eta)) without overflow.
Eigen::ArrayXd softplus(const Eigen::ArrayXd& eta) {
  return eta.max(0.0) + (-eta.abs()).exp().log1p();
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite values in ") + what);
}

// Design with a leading column of ones when an intercept is requested.
Matrix with_intercept(const Matrix& X) {
  Matrix Z(X.rows(), X.cols() + 1);
  Z.col(0).setOnes();
  Z.rightCols(X.cols()) = X;
  return Z;
}

Vector eta_of(const Matrix& Z, const Vector& beta, const Vector& offset) {
  Vector eta = (Z.cols() > 0) ? Vector(Z * beta) : Vector::Zero(Z.rows());
  if (offset.size() > 0) eta += offset;
  return eta;
}

// Every fitted probability within 1e-6 of its response: the data are
// separated and the likelihood has no finite maximizer.
bool separated(const Vector& y, const Vector& eta) {
  return ((y - expit(eta)).array().abs() < 1e-6).all();
}

Vector solve_newton(const Matrix& H, const Vector& score, bool& rank_deficient) {
  Eigen::LDLT<Matrix> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const auto& d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    if (dmax > 0.0 && dmin > 1e-14 * dmax) return ldlt.solve(score);
  }
  rank_deficient = true;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(H);
  cod.setThreshold(1e-12);
  return cod.solve(score);
}

}  // namespace

Vector expit(const Vector& eta) {
  return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
}

Vector logit(const Vector& p) {
  return (p.array() / (1.0 - p.array())).log().matrix();
}

double log_likelihood(const Vector& y, const Vector& eta) {
  return (y.array() * eta.array() - softplus(eta.array())).sum();
}

double mean_nll(const Vector& y, const Vector& eta) {
  return -log_likelihood(y, eta) / static_cast<double>(y.size());
}

LogisticFit fit_logistic(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                         const LogisticOptions& options, const Vector& start) {
  const auto n = y.size();
  if (n < 1) throw std::invalid_argument("fit_logistic: empty response");
  if (X.rows() != n && X.cols() > 0)
    throw std::invalid_argument("fit_logistic: design rows differ from response length");
  if (offset.size() != 0 && offset.size() != n)
    throw std::invalid_argument("fit_logistic: offset length differs from response length");
  require_finite(X, "design matrix");
  require_finite(y, "response");
  require_finite(offset, "offset");
  if ((y.array() < 0.0).any() || (y.array() > 1.0).any())
    throw std::invalid_argument("fit_logistic: responses must lie in [0, 1]");

  const Matrix Z = intercept ? with_intercept(X.rows() == n ? X : Matrix(n, 0)) : X;
  const auto d = Z.cols();

  LogisticFit fit;
  fit.intercept = intercept;
  fit.coefficients = (start.size() == d) ? start : Vector::Zero(d);
  if (d == 0) {
    fit.converged = true;
    return fit;
  }

  Vector& beta = fit.coefficients;
  Vector eta = eta_of(Z, beta, offset);
  double ll = log_likelihood(y, eta);

  for (int it = 0;; ++it) {
    const Vector p = expit(eta);
    const Vector score = Z.transpose() * (y - p);
    fit.max_abs_score = score.cwiseAbs().maxCoeff();
    if (fit.max_abs_score <= options.tolerance) {
      if (separated(y, eta) && beta.cwiseAbs().maxCoeff() > 0.0) {
        // push along the separating direction onto the cap
        beta *= options.coefficient_cap / beta.cwiseAbs().maxCoeff();
        eta = eta_of(Z, beta, offset);
        fit.capped = true;
        fit.max_abs_score = (Z.transpose() * (y - expit(eta))).cwiseAbs().maxCoeff();
        break;
      }
      fit.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    const Eigen::ArrayXd w = (p.array() * (1.0 - p.array())).max(1e-300);
    const Matrix Zw = Z.array().colwise() * w.sqrt();
    Matrix H = Matrix::Zero(d, d);
    H.selfadjointView<Eigen::Lower>().rankUpdate(Zw.transpose());
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    const Vector delta = solve_newton(H, score, fit.rank_deficient);

    // Step halving keeps the likelihood from decreasing.
    double t = 1.0;
    Vector beta_new, eta_new;
    double ll_new = ll;
    for (int half = 0; half < 40; ++half) {
      beta_new = beta + t * delta;
      eta_new = eta_of(Z, beta_new, offset);
      ll_new = log_likelihood(y, eta_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) break;
      t *= 0.5;
    }
    beta = std::move(beta_new);
    eta = std::move(eta_new);
    ll = ll_new;
    ++fit.iterations;

    if (beta.cwiseAbs().maxCoeff() > options.coefficient_cap) {
      beta = beta.cwiseMax(-options.coefficient_cap).cwiseMin(options.coefficient_cap);
      eta = eta_of(Z, beta, offset);
      fit.capped = true;
      fit.max_abs_score = (Z.transpose() * (y - expit(eta))).cwiseAbs().maxCoeff();
      break;
    }
  }
  if (!beta.allFinite()) throw NumericalError("fit_logistic: non-finite coefficients");
  return fit;
}

GrowingLogistic::GrowingLogistic(const Vector& y, LogisticOptions options) : options_(options) {
  const auto n = y.size();
  if (n < 1) throw std::invalid_argument("GrowingLogistic: empty response");
  design_ = Matrix::Ones(n, 1);
  const double mean = y.mean();
  fit_.intercept = true;
  fit_.coefficients = Vector::Zero(1);
  if (mean > 0.0 && mean < 1.0) {
    fit_.coefficients[0] = logit(mean);
    fit_.converged = true;
  } else {
    fit_ = fit_logistic(Matrix(n, 0), y, Vector(), true, options_);
  }
  eta_ = Vector::Constant(n, fit_.coefficients[0]);
  fit_.max_abs_score = std::abs((y - expit(eta_)).sum());
  refactor();
}

void GrowingLogistic::refactor() {
  const Eigen::ArrayXd p = expit(eta_).array();
  const Eigen::ArrayXd w = (p * (1.0 - p)).max(1e-300);
  const Matrix Zw = design_.array().colwise() * w.sqrt();
  Matrix H = Matrix::Zero(design_.cols(), design_.cols());
  H.selfadjointView<Eigen::Lower>().rankUpdate(Zw.transpose());
  Eigen::LLT<Matrix> llt(H.selfadjointView<Eigen::Lower>());
  have_factor_ = llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0;
  if (have_factor_) chol_ = llt.matrixL();
}

GrowingLogistic GrowingLogistic::extend(const Matrix& extra, const Vector& y) const {
  const auto n = design_.rows();
  if (extra.rows() != n || y.size() != n) throw std::invalid_argument("GrowingLogistic: row count mismatch");
  require_finite(extra, "design matrix");
  const auto d0 = design_.cols();
  const auto m = extra.cols();
  const auto d = d0 + m;

  GrowingLogistic out;
  out.options_ = options_;
  out.design_.resize(n, d);
  out.design_.leftCols(d0) = design_;
  out.design_.rightCols(m) = extra;
  out.eta_ = eta_;
  out.fit_.intercept = true;
  out.fit_.coefficients = Vector::Zero(d);
  out.fit_.coefficients.head(d0) = fit_.coefficients;

  auto full_refit = [&]() {
    out.fit_ = fit_logistic(Matrix(out.design_.rightCols(d - 1)), y, Vector(), true,
                            options_, out.fit_.coefficients.allFinite() ? out.fit_.coefficients : Vector());
    out.eta_ = out.design_ * out.fit_.coefficients;
    out.refactor();
    return out;
  };
  if (!have_factor_ || fit_.capped || m == 0) return full_refit();

  // Border the factor at the current weights: exact Hessian at the warm start.
  {
    const Eigen::ArrayXd p = expit(eta_).array();
    const Eigen::ArrayXd w = (p * (1.0 - p)).max(1e-300);
    const Matrix wx = extra.array().colwise() * w;
    const Matrix B = design_.transpose() * wx;
    const Matrix C = extra.transpose() * wx;
    const Matrix L21 = chol_.triangularView<Eigen::Lower>().solve(B);
    const Matrix S = C - L21.transpose() * L21;
    Eigen::LLT<Matrix> llt(S);
    const double scale = C.diagonal().cwiseAbs().maxCoeff();
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array().square().minCoeff() > 1e-10 * scale))
      return full_refit();
    out.chol_ = Matrix::Zero(d, d);
    out.chol_.topLeftCorner(d0, d0) = chol_;
    out.chol_.bottomLeftCorner(m, d0) = L21.transpose();
    out.chol_.bottomRightCorner(m, m) = llt.matrixL();
    out.have_factor_ = true;
  }

  LogisticFit& fit = out.fit_;
  Vector& beta = fit.coefficients;
  double ll = log_likelihood(y, out.eta_);
  int stale = 0;  // iterations since the factor was last exact
  for (int it = 0;; ++it) {
    const Vector score = out.design_.transpose() * (y - expit(out.eta_));
    fit.max_abs_score = score.cwiseAbs().maxCoeff();
    if (fit.max_abs_score <= options_.tolerance) {
      if (separated(y, out.eta_)) return full_refit();
      fit.converged = true;
      break;
    }
    if (it >= options_.max_iterations) return full_refit();
    if (stale >= 4) {
      out.refactor();
      if (!out.have_factor_) return full_refit();
      stale = 0;
    }
    Vector delta = out.chol_.triangularView<Eigen::Lower>().solve(score);
    out.chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(delta);
    double t = 1.0;
    Vector beta_new, eta_new;
    double ll_new = ll;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      beta_new = beta + t * delta;
      eta_new = out.eta_ + t * (out.design_ * delta);
      ll_new = log_likelihood(y, eta_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) return full_refit();
    if (t < 1.0) stale = 4;  // the reused curvature overshoots; rebuild it
    beta = std::move(beta_new);
    out.eta_ = std::move(eta_new);
    ll = ll_new;
    ++fit.iterations;
    ++stale;
    if (beta.cwiseAbs().maxCoeff() > options_.coefficient_cap) return full_refit();
  }
  if (!beta.allFinite()) throw NumericalError("GrowingLogistic: non-finite coefficients");
  return out;
}

Vector linear_predictor(const LogisticFit& fit, const Matrix& X, const Vector& offset) {
  const auto expected = X.cols() + (fit.intercept ? 1 : 0);
  if (fit.coefficients.size() != expected)
    throw std::invalid_argument("linear_predictor: design width does not match the fit");
  if (offset.size() != 0 && offset.size() != X.rows())
    throw std::invalid_argument("linear_predictor: offset length does not match design rows");
  Vector eta = Vector::Zero(X.rows());
  if (fit.intercept) {
    eta.setConstant(fit.coefficients[0]);
    if (X.cols() > 0) eta += X * fit.coefficients.tail(X.cols());
  } else if (X.cols() > 0) {
    eta = X * fit.coefficients;
  }
  if (offset.size() != 0) eta += offset;
  return eta;
}

Vector predict_proba(const LogisticFit& fit, const Matrix& X, const Vector& offset) {
  return expit(linear_predictor(fit, X, offset));
}

Vector logistic_score(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                      const Vector& coefficients) {
  LogisticFit f;
  f.intercept = intercept;
  f.coefficients = coefficients;
  const Vector r = y - predict_proba(f, X, offset);
  if (!intercept) return X.transpose() * r;
  Vector s(X.cols() + 1);
  s[0] = r.sum();
  s.tail(X.cols()) = X.transpose() * r;
  return s;
}

double logistic_loglik(const Matrix& X, const Vector& y, const Vector& offset, bool intercept,
                       const Vector& coefficients) {
  LogisticFit f;
  f.intercept = intercept;
  f.coefficients = coefficients;
  return log_likelihood(y, linear_predictor(f, X, offset));
}

double fit_epsilon(const Vector& y, const Vector& offset, const Vector& h) {
  if (y.size() != h.size() || offset.size() != h.size())
    throw std::invalid_argument("fit_epsilon: length mismatch");
  if ((h.array() == 0.0).all()) throw NumericalError("fit_epsilon: clever covariate is all zero");
  require_finite(h, "clever covariate");
  require_finite(offset, "offset");

  // The score is strictly decreasing in epsilon; Newton with a bisection
  // fallback inside a shrinking bracket.
  constexpr double kCap = 100.0;
  const Eigen::ArrayXd ha = h.array();
  const Eigen::ArrayXd oa = offset.array();
  const Eigen::ArrayXd ya = y.array();
  auto score_and_slope = [&](double eps, double& slope) {
    const Eigen::ArrayXd p = 1.0 / (1.0 + (-(oa + eps * ha)).exp());
    slope = -(ha.square() * p * (1.0 - p)).sum();
    return (ha * (ya - p)).sum();
  };

  double lo = -kCap, hi = kCap;
  double eps = 0.0;
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double s = score_and_slope(eps, slope);
    if (s == 0.0) return eps;
    if (s > 0.0) lo = eps; else hi = eps;
    double next = (slope < 0.0) ? eps - s / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - eps) <= 1e-15 * std::max(1.0, std::abs(eps))) return next;
    eps = next;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(eps))) return eps;
  }
  return eps;
}

}  // namespace ctmle
