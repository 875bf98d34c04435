#include "ctmle/sl_ctmle.hpp"

#include <atomic>
#include <exception>
#include <stdexcept>
#include <thread>

namespace ctmle {

std::vector<SearchStrategy> default_sl_strategies() {
  return {OrderingRule::logistic, OrderingRule::partial_correlation};
}

SlCtmleResult run_sl_ctmle_detailed(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                                    const std::vector<SearchStrategy>& strategies, const CtmleOptions& opts,
                                    Index jobs) {
  if (strategies.empty()) throw std::invalid_argument("sl-ctmle needs at least one strategy");
  validate(opts);
  const Dataset& ds = input.scaled;
  SlCtmleResult out{EstimateReport{}, make_folds(ds.n(), opts.folds, opts.seed), {}, 0, 0, {}, {}};
  const InitialFits initials = fit_initials(ds, qbar_spec, out.folds);

  const Index m = strategies.size();
  out.runs.resize(m);
  std::vector<std::exception_ptr> errors(m);
  auto work = [&](Index s) {
    try {
      const ResolvedStrategy resolved = resolve_strategy(strategies[s], ds, initials.full, opts.truncation);
      out.runs[s] = run_sequence(ds, initials, resolved, opts, strategy_label(strategies[s]));
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  if (jobs <= 1 || m == 1) {
    for (Index s = 0; s < m; ++s) work(s);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    for (Index t = 0; t < std::min(jobs, m); ++t)
      pool.emplace_back([&] {
        for (Index s = next++; s < m; s = next++) work(s);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const SelectionScore* best = nullptr;
  for (Index s = 0; s < m; ++s) {
    out.full_stats += out.runs[s].full_stats;
    out.cv_stats += out.runs[s].cv_stats;
    for (const auto& score : out.runs[s].scores) {
      // strict comparisons keep the earlier strategy on a full tie
      if (!best || score.total < best->total || (score.total == best->total && score.k < best->k)) {
        best = &score;
        out.strategy_selected = s;
        out.k_selected = score.k;
      }
    }
  }

  const SequenceRun& run = out.runs[out.strategy_selected];
  const CandidateTriplet& chosen = run.candidates[out.k_selected];
  out.report = candidate_report(chosen, input);
  out.report.method = "sl-ctmle";
  out.report.k_selected = out.k_selected;
  out.report.strategy_selected = run.label;
  auto& d = out.report.diagnostics;
  d["covariate_set"] = nlohmann::json::array();
  for (auto j : chosen.covariate_set) d["covariate_set"].push_back(ds.covariate_names()[j]);
  d["epsilon"] = chosen.epsilon;
  d["ps_fits"] = out.full_stats.ps_fits;
  d["cv_ps_fits"] = out.cv_stats.ps_fits;
  d["resets"] = out.full_stats.resets;
  if (opts.diagnostics) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& r : out.runs) per[r.label] = scores_to_json(r.scores);
    d["scores"] = per;
  }
  return out;
}

EstimateReport run_sl_ctmle(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                            const std::vector<SearchStrategy>& strategies, const CtmleOptions& opts, Index jobs) {
  return run_sl_ctmle_detailed(input, qbar_spec, strategies, opts, jobs).report;
}

}  // namespace ctmle
