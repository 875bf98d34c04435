#include "ctmle/methods.hpp"

#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ctmle/sl_ctmle.hpp"
#include "ctmle/tmle.hpp"

namespace ctmle {

namespace {

const std::map<std::string, Method>& method_table() {
  static const std::map<std::string, Method> table{
      {"unadjusted", Method::unadjusted},         {"gcomp", Method::gcomp},
      {"mle", Method::gcomp},                     {"iptw", Method::iptw},
      {"aiptw", Method::aiptw},                   {"a-iptw", Method::aiptw},
      {"tmle", Method::tmle},                     {"ctmle-greedy", Method::ctmle_greedy},
      {"ctmle-logistic", Method::ctmle_logistic}, {"ctmle-partcorr", Method::ctmle_partcorr},
      {"ctmle-preorder", Method::ctmle_preorder}, {"sl-ctmle", Method::sl_ctmle},
      {"iptw-ctmle", Method::iptw_ctmle},
  };
  return table;
}

PropensityFit main_terms_ps(const Dataset& ds, const TruncationBounds& bounds) {
  std::vector<Index> all(ds.p());
  std::iota(all.begin(), all.end(), Index{0});
  const PropensityModel model = fit_propensity_model(ds, all);
  PropensityFit g = make_propensity(predict_propensity(model, ds), bounds);
  return g;
}

EstimateReport labelled(EstimateReport r, Method m) {
  r.method = method_name(m);
  return r;
}

}  // namespace

std::optional<Method> parse_method(const std::string& name) {
  const auto it = method_table().find(name);
  if (it == method_table().end()) return std::nullopt;
  return it->second;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::unadjusted: return "unadjusted";
    case Method::gcomp: return "gcomp";
    case Method::iptw: return "iptw";
    case Method::aiptw: return "aiptw";
    case Method::tmle: return "tmle";
    case Method::ctmle_greedy: return "ctmle-greedy";
    case Method::ctmle_logistic: return "ctmle-logistic";
    case Method::ctmle_partcorr: return "ctmle-partcorr";
    case Method::ctmle_preorder: return "ctmle-preorder";
    case Method::sl_ctmle: return "sl-ctmle";
    case Method::iptw_ctmle: return "iptw-ctmle";
  }
  return "unknown";
}

const std::vector<Method>& table_methods() {
  static const std::vector<Method> methods{Method::unadjusted,    Method::gcomp,          Method::iptw,
                                           Method::aiptw,         Method::tmle,           Method::ctmle_greedy,
                                           Method::ctmle_logistic, Method::ctmle_partcorr, Method::sl_ctmle};
  return methods;
}

OutcomeModelSpec all_covariates(const Dataset& ds) {
  OutcomeModelSpec spec;
  spec.covariates.resize(ds.p());
  std::iota(spec.covariates.begin(), spec.covariates.end(), Index{0});
  return spec;
}

OutcomeModelSpec parse_qbar_formula(const std::string& formula, const Dataset& ds) {
  if (formula.empty() || formula == "all") return all_covariates(ds);
  OutcomeModelSpec spec;
  std::stringstream in(formula);
  std::string name;
  while (std::getline(in, name, ',')) {
    const auto first = name.find_first_not_of(" \t");
    const auto last = name.find_last_not_of(" \t");
    if (first == std::string::npos) continue;
    spec.covariates.push_back(ds.covariate_index(name.substr(first, last - first + 1)));
  }
  return spec;
}

EstimateReport estimate(Method method, const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                        const MethodOptions& opts) {
  const Dataset& raw = input.raw;
  const Dataset& scaled = input.scaled;
  const TruncationBounds& bounds = opts.ctmle.truncation;
  CtmleOptions copts = opts.ctmle;

  switch (method) {
    case Method::unadjusted: {
      const double psi = unadjusted(raw);
      return labelled(ic_inference(unadjusted_ic(raw), psi), method);
    }
    case Method::gcomp: {
      const QbarValues q = predict_outcome(fit_outcome_model(qbar_spec, scaled), scaled);
      const double psi = gcomp(q);
      // plug-in IC that ignores estimation of the outcome model
      const Vector ic = (q.treated - q.control).array() - psi;
      return labelled(unscale_report(ic_inference(ic, psi), input.scaler), method);
    }
    case Method::iptw: {
      const PropensityFit g = main_terms_ps(raw, bounds);
      const double psi = iptw(g, raw);
      EstimateReport r = ic_inference(iptw_ic(g, raw, psi), psi);
      r.diagnostics["ps_truncated"] = g.truncated_count;
      return labelled(std::move(r), method);
    }
    case Method::aiptw: {
      const QbarValues q = predict_outcome(fit_outcome_model(qbar_spec, scaled), scaled);
      const PropensityFit g = main_terms_ps(scaled, bounds);
      const double psi = aiptw(q, g, scaled);
      EstimateReport r = ic_inference(eic_values(q, g, psi, scaled), psi);
      r.diagnostics["ps_truncated"] = g.truncated_count;
      return labelled(unscale_report(std::move(r), input.scaler), method);
    }
    case Method::tmle: {
      const QbarValues q = predict_outcome(fit_outcome_model(qbar_spec, scaled), scaled);
      const PropensityFit g = main_terms_ps(scaled, bounds);
      return labelled(unscale_report(tmle_ate(target(q, g, scaled), scaled), input.scaler), method);
    }
    case Method::ctmle_greedy:
      copts.strategy = GreedySearch{};
      return run_ctmle(input, qbar_spec, copts);
    case Method::ctmle_logistic:
      copts.strategy = OrderingRule::logistic;
      return run_ctmle(input, qbar_spec, copts);
    case Method::ctmle_partcorr:
      copts.strategy = OrderingRule::partial_correlation;
      return run_ctmle(input, qbar_spec, copts);
    case Method::ctmle_preorder: {
      copts.strategy = opts.ordering.value_or(OrderingRule::logistic);
      if (std::holds_alternative<GreedySearch>(copts.strategy))
        throw std::invalid_argument("ctmle-preorder needs an ordering");
      EstimateReport r = run_ctmle(input, qbar_spec, copts);
      return r;
    }
    case Method::sl_ctmle:
      return run_sl_ctmle(input, qbar_spec, opts.sl_strategies.empty() ? default_sl_strategies() : opts.sl_strategies,
                          copts, opts.jobs);
    case Method::iptw_ctmle:
      copts.strategy = GreedySearch{};
      return iptw_post_selection(input, qbar_spec, copts);
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace ctmle
