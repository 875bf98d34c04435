#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctmle/estimators.hpp"
#include "ctmle/hdps.hpp"

namespace ctmle {

enum class Study { sim1, sim2, sim3, sim4, plasmode, synthetic_claims };

std::optional<Study> parse_study(const std::string& name);
std::string to_string(Study s);

/// 10^7-draw Monte-Carlo value of E[expit(-2 + 2W2 + 2W3 + W4) - expit(-3 + 2W2 + 2W3 + W4)]
/// for W ~ U[0,1]^4, and its Monte-Carlo standard error.
inline constexpr double kSim3TrueAte = 0.21105052124696624;
inline constexpr double kSim3TrueAteMcSe = 1.13007e-5;

/// Outcome coefficients of the plasmode design (10 baseline + 5 hdPS covariates).
const std::vector<double>& plasmode_beta();

/// Parameters shared by the plasmode and synthetic-claims studies.
struct ClaimsDesign {
  Index codes = 500;
  Index clusters = 8;
  Index planted = 3;             // codes whose latent state drives exposure and outcome
  double planted_prevalence = 0.3;
  double exposure_effect = 1.0;  // log-odds per planted latent state
  double outcome_effect = 1.0;
  Index J = 20;
  Index K = 40;
};

struct StudySpec {
  Study study = Study::sim1;
  Index n = 1000;
  std::optional<double> true_ate;  // empty when it depends on the sample (plasmode)
  std::optional<OutcomeModelSpec> qbar_correct;
  std::optional<OutcomeModelSpec> qbar_misspecified;
  ClaimsDesign claims;
};

/// Defaults: n = 10000 for sim3, 5000 for the claims studies, 1000 otherwise.
StudySpec study_spec(Study s, std::optional<Index> n = std::nullopt);

double true_ate(Study s);

/// One simulated data set with the truth it should be compared against.
struct Sample {
  Dataset data;
  double truth = 0.0;
};

/// Deterministic per seed.
Sample generate(const StudySpec& spec, std::uint64_t seed);

struct PlasmodeOutcome {
  Vector y;
  double true_ate = 0.0;
};

/// Y_i ~ Bernoulli(expit(beta' W'_i + A_i)); the truth is the sample mean of
/// expit(beta' W'_i + 1) - expit(beta' W'_i).
PlasmodeOutcome plasmode_outcomes(const Matrix& w_selected, const Vector& a, const std::vector<double>& beta,
                                  std::uint64_t seed);

struct SyntheticClaims {
  ClaimMatrix claims;
  std::vector<std::string> patient_ids;
  Vector treatment;
  Vector outcome;               // binary, driven by baseline and planted states
  Matrix baseline;              // n x 10: 7 binary then 3 continuous
  std::vector<std::string> baseline_names;
  std::vector<Index> planted_codes;  // columns of `claims`
};

/// Poisson-gamma counts; planted codes have a latent binary state raising
/// their counts, the exposure log-odds and the outcome log-odds. With
/// `planted` = 0 the exposure ignores the claims entirely.
SyntheticClaims synthetic_claims(Index n, const ClaimsDesign& design, std::uint64_t seed);

}  // namespace ctmle
