#include "ctmle/estimators.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace ctmle {

namespace {

void require_same_length(const Vector& v, const Dataset& ds, const char* what) {
  if (static_cast<Index>(v.size()) != ds.n())
    throw std::invalid_argument(std::string(what) + ": length differs from dataset size");
}

void check_qbar(const QbarValues& q, const Dataset& ds) {
  require_same_length(q.observed, ds, "qbar observed");
  require_same_length(q.treated, ds, "qbar treated");
  require_same_length(q.control, ds, "qbar control");
}

Matrix columns_of(const Dataset& ds, const std::vector<Index>& cols) {
  Matrix X(static_cast<Eigen::Index>(ds.n()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= ds.p()) throw std::invalid_argument("covariate index out of range");
    X.col(static_cast<Eigen::Index>(j)) = ds.covariates().col(static_cast<Eigen::Index>(cols[j]));
  }
  return X;
}

// Signed inverse weight [I(A=1) - I(A=0)] / g(A, W).
Vector signed_weights(const PropensityFit& g, const Dataset& ds) {
  const auto& a = ds.treatment().array();
  return (a / g.g1.array() - (1.0 - a) / (1.0 - g.g1.array())).matrix();
}

}  // namespace

void validate(const TruncationBounds& b) {
  if (!(b.lower > 0.0 && b.lower <= b.upper && b.upper < 1.0))
    throw std::invalid_argument("truncation bounds must satisfy 0 < lower <= upper < 1");
}

Vector truncate_ps(const Vector& g1, double lower, double upper) {
  validate(TruncationBounds{lower, upper});
  return g1.cwiseMax(lower).cwiseMin(upper);
}

PropensityFit make_propensity(const Vector& g1_raw, const TruncationBounds& bounds) {
  PropensityFit g;
  g.bounds = bounds;
  g.g1 = truncate_ps(g1_raw, bounds.lower, bounds.upper);
  g.truncated_count = static_cast<Index>(
      ((g1_raw.array() < bounds.lower) || (g1_raw.array() > bounds.upper)).count());
  return g;
}

PropensityModel fit_propensity_model(const Dataset& ds, std::vector<Index> covariates,
                                     const LogisticOptions& options, const Vector& start) {
  PropensityModel model;
  model.fit = fit_logistic(columns_of(ds, covariates), ds.treatment(), Vector(), true, options, start);
  model.covariates = std::move(covariates);
  return model;
}

Vector predict_propensity(const PropensityModel& model, const Dataset& ds) {
  return predict_proba(model.fit, columns_of(ds, model.covariates));
}

OutcomeModel fit_outcome_model(const OutcomeModelSpec& spec, const Dataset& ds) {
  Matrix X(static_cast<Eigen::Index>(ds.n()), static_cast<Eigen::Index>(spec.covariates.size() + 1));
  X.col(0) = ds.treatment();
  X.rightCols(static_cast<Eigen::Index>(spec.covariates.size())) = columns_of(ds, spec.covariates);
  const OutcomeFamily family = spec.family.value_or(
      ds.outcome_kind() == OutcomeKind::binary ? OutcomeFamily::logistic : OutcomeFamily::linear);
  if (family == OutcomeFamily::logistic) return OutcomeModel{spec, family, fit_logistic(X, ds.outcome(), Vector(), true)};

  Matrix X1(X.rows(), X.cols() + 1);
  X1.col(0).setOnes();
  X1.rightCols(X.cols()) = X;
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X1);
  LogisticFit fit;
  fit.coefficients = cod.solve(ds.outcome());
  if (!fit.coefficients.allFinite()) throw NumericalError("outcome regression produced non-finite coefficients");
  fit.rank_deficient = cod.rank() < X1.cols();
  return OutcomeModel{spec, family, fit};
}

QbarValues predict_outcome(const OutcomeModel& model, const Dataset& ds) {
  const Matrix W = columns_of(ds, model.spec.covariates);
  Matrix X(W.rows(), W.cols() + 1);
  X.rightCols(W.cols()) = W;
  auto predict = [&](const Matrix& design) -> Vector {
    if (model.family == OutcomeFamily::logistic) return predict_proba(model.fit, design);
    const Vector eta = (design * model.fit.coefficients.tail(design.cols())).array() + model.fit.coefficients[0];
    return eta.cwiseMax(0.0).cwiseMin(1.0);
  };
  QbarValues q;
  X.col(0) = ds.treatment();
  q.observed = predict(X);
  X.col(0).setOnes();
  q.treated = predict(X);
  X.col(0).setZero();
  q.control = predict(X);
  return q;
}

double unadjusted(const Dataset& ds) {
  const auto& a = ds.treatment().array();
  const auto& y = ds.outcome().array();
  const double n1 = a.sum();
  const double n0 = static_cast<double>(ds.n()) - n1;
  if (n1 == 0.0 || n0 == 0.0) throw DataError("unadjusted estimator needs both treatment arms");
  return (a * y).sum() / n1 - ((1.0 - a) * y).sum() / n0;
}

double gcomp(const QbarValues& qbar) {
  return (qbar.treated - qbar.control).mean();
}

double iptw(const PropensityFit& g, const Dataset& ds) {
  require_same_length(g.g1, ds, "propensity");
  return (signed_weights(g, ds).array() * ds.outcome().array()).mean();
}

double aiptw(const QbarValues& qbar, const PropensityFit& g, const Dataset& ds) {
  check_qbar(qbar, ds);
  require_same_length(g.g1, ds, "propensity");
  const Vector residual = ds.outcome() - qbar.observed;
  return (signed_weights(g, ds).array() * residual.array()).mean() + gcomp(qbar);
}

Vector eic_values(const QbarValues& qbar, const PropensityFit& g, double psi, const Dataset& ds) {
  check_qbar(qbar, ds);
  require_same_length(g.g1, ds, "propensity");
  const Vector h = signed_weights(g, ds);
  return (h.array() * (ds.outcome() - qbar.observed).array() + qbar.treated.array() -
          qbar.control.array() - psi)
      .matrix();
}

EstimateReport ic_inference(const Vector& eic, double psi, double level) {
  if (eic.size() < 2) throw std::invalid_argument("ic_inference needs at least two observations");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  const double n = static_cast<double>(eic.size());
  const double sigma2 = eic.squaredNorm() / n;
  const double z = (level == 0.95)
                       ? 1.96
                       : boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
  EstimateReport r;
  r.psi = psi;
  r.se = std::sqrt(sigma2 / n);
  r.ci_lower = psi - z * r.se;
  r.ci_upper = psi + z * r.se;
  return r;
}

EstimateReport unscale_report(EstimateReport r, const OutcomeScaler& scaler) {
  const double f = scaler.ate_factor();
  r.psi *= f;
  r.se *= f;
  r.ci_lower *= f;
  r.ci_upper *= f;
  return r;
}

void to_json(nlohmann::json& j, const EstimateReport& r) {
  j = nlohmann::json{{"method", r.method},     {"psi", r.psi},
                     {"se", r.se},             {"ci_lower", r.ci_lower},
                     {"ci_upper", r.ci_upper}, {"diagnostics", r.diagnostics}};
  j["k_selected"] = r.k_selected ? nlohmann::json(*r.k_selected) : nlohmann::json(nullptr);
  j["strategy_selected"] =
      r.strategy_selected ? nlohmann::json(*r.strategy_selected) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, EstimateReport& r) {
  j.at("method").get_to(r.method);
  j.at("psi").get_to(r.psi);
  j.at("se").get_to(r.se);
  j.at("ci_lower").get_to(r.ci_lower);
  j.at("ci_upper").get_to(r.ci_upper);
  r.k_selected.reset();
  r.strategy_selected.reset();
  if (j.contains("k_selected") && !j["k_selected"].is_null())
    r.k_selected = j["k_selected"].get<Index>();
  if (j.contains("strategy_selected") && !j["strategy_selected"].is_null())
    r.strategy_selected = j["strategy_selected"].get<std::string>();
  r.diagnostics = j.value("diagnostics", nlohmann::json::object());
}

Vector unadjusted_ic(const Dataset& ds) {
  const auto& a = ds.treatment().array();
  const auto& y = ds.outcome().array();
  const double p1 = a.mean();
  const double mu1 = (a * y).sum() / a.sum();
  const double mu0 = ((1.0 - a) * y).sum() / (1.0 - a).sum();
  return (a * (y - mu1) / p1 - (1.0 - a) * (y - mu0) / (1.0 - p1)).matrix();
}

Vector iptw_ic(const PropensityFit& g, const Dataset& ds, double psi) {
  return (signed_weights(g, ds).array() * ds.outcome().array() - psi).matrix();
}

}  // namespace ctmle
