#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "ctmle/data.hpp"
#include "ctmle/glm.hpp"

namespace ctmle {

struct TruncationBounds {
  double lower = 0.025;
  double upper = 0.975;
};

void validate(const TruncationBounds& bounds);

/// Propensity scores g(1 | W_i) after truncation.
struct PropensityFit {
  Vector g1;
  TruncationBounds bounds;
  Index truncated_count = 0;
};

Vector truncate_ps(const Vector& g1, double lower, double upper);
PropensityFit make_propensity(const Vector& g1_raw, const TruncationBounds& bounds);

/// Main-terms logistic propensity model on the given covariates (intercept
/// always included; an empty set gives P_n(A = 1)).
struct PropensityModel {
  std::vector<Index> covariates;
  LogisticFit fit;
};

PropensityModel fit_propensity_model(const Dataset& ds, std::vector<Index> covariates,
                                     const LogisticOptions& options = {},
                                     const Vector& start = Vector());
Vector predict_propensity(const PropensityModel& model, const Dataset& ds);

/// Outcome regression evaluated at the observed rows: Q(A_i, W_i), Q(1, W_i), Q(0, W_i).
struct QbarValues {
  Vector observed;
  Vector treated;
  Vector control;
};

/// logistic: logit Q(a, W) = b0 + b1*a + sum_j c_j W_j.
/// linear: the same predictor by least squares, predictions clipped to [0, 1].
enum class OutcomeFamily { logistic, linear };

/// Main-terms outcome model. Without an explicit family, binary outcomes
/// get the logistic model and bounded continuous ones the linear model.
struct OutcomeModelSpec {
  std::vector<Index> covariates;
  std::optional<OutcomeFamily> family;
};

struct OutcomeModel {
  OutcomeModelSpec spec;
  OutcomeFamily family = OutcomeFamily::logistic;
  LogisticFit fit;  // for the linear family only `coefficients` is used
};

OutcomeModel fit_outcome_model(const OutcomeModelSpec& spec, const Dataset& ds);
QbarValues predict_outcome(const OutcomeModel& model, const Dataset& ds);

double unadjusted(const Dataset& ds);
double gcomp(const QbarValues& qbar);
double iptw(const PropensityFit& g, const Dataset& ds);
double aiptw(const QbarValues& qbar, const PropensityFit& g, const Dataset& ds);

/// D*(Q, g)(O_i) = H_g(A_i, W_i)(Y_i - Q(A_i, W_i)) + Q(1, W_i) - Q(0, W_i) - psi.
Vector eic_values(const QbarValues& qbar, const PropensityFit& g, double psi, const Dataset& ds);

struct EstimateReport {
  std::string method;
  double psi = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::optional<Index> k_selected;
  std::optional<std::string> strategy_selected;
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// sigma^2 = mean(D*^2), se = sigma / sqrt(n), CI = psi -/+ z * se.
EstimateReport ic_inference(const Vector& eic, double psi, double level = 0.95);

/// Puts a report computed on the [0,1] outcome back on the raw scale.
EstimateReport unscale_report(EstimateReport report, const OutcomeScaler& scaler);

void to_json(nlohmann::json& j, const EstimateReport& r);
void from_json(const nlohmann::json& j, EstimateReport& r);

/// Influence-curve vectors for the non-targeted estimators; nuisance
/// estimation is ignored, so these understate uncertainty.
Vector unadjusted_ic(const Dataset& ds);
Vector iptw_ic(const PropensityFit& g, const Dataset& ds, double psi);

}  // namespace ctmle
