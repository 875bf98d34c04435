#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctmle/engine.hpp"

namespace ctmle {

enum class Method {
  unadjusted,
  gcomp,
  iptw,
  aiptw,
  tmle,
  ctmle_greedy,
  ctmle_logistic,
  ctmle_partcorr,
  ctmle_preorder,  // ordering taken from MethodOptions::ordering
  sl_ctmle,
  iptw_ctmle,
};

/// Accepts the CLI spellings ("tmle", "ctmle-greedy", "mle" for gcomp, ...).
std::optional<Method> parse_method(const std::string& name);
std::string method_name(Method m);

/// The nine estimators of the simulation tables, in table order.
const std::vector<Method>& table_methods();

struct MethodOptions {
  CtmleOptions ctmle;
  std::optional<SearchStrategy> ordering;        // for ctmle-preorder
  std::vector<SearchStrategy> sl_strategies;     // empty = default pair
  Index jobs = 1;
};

/// Runs one estimator. Q-based methods work on the scaled outcome and are
/// reported on the raw scale; unadjusted and IPTW use the raw outcome.
/// Propensity models use main terms of every covariate.
EstimateReport estimate(Method method, const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                        const MethodOptions& opts = {});

/// Main-terms spec on every covariate.
OutcomeModelSpec all_covariates(const Dataset& ds);

/// Parses "all" or a comma-separated list of covariate names.
OutcomeModelSpec parse_qbar_formula(const std::string& formula, const Dataset& ds);

}  // namespace ctmle
