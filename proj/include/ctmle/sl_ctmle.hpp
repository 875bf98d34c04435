#pragma once

#include <vector>

#include "ctmle/engine.hpp"

namespace ctmle {

/// The pre-ordering strategies used when none are given.
std::vector<SearchStrategy> default_sl_strategies();

struct SlCtmleResult {
  EstimateReport report;
  FoldAssignment folds;
  std::vector<SequenceRun> runs;  // one per strategy, in input order
  Index strategy_selected = 0;
  Index k_selected = 0;
  SequenceStats full_stats;  // summed over strategies
  SequenceStats cv_stats;
};

/// One cross-validation shared by all strategies selects strategy and step
/// together. `opts.strategy` is ignored; patience applies per strategy.
/// `jobs` > 1 evaluates strategies on worker threads.
SlCtmleResult run_sl_ctmle_detailed(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                                    const std::vector<SearchStrategy>& strategies, const CtmleOptions& opts,
                                    Index jobs = 1);

EstimateReport run_sl_ctmle(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                            const std::vector<SearchStrategy>& strategies, const CtmleOptions& opts,
                            Index jobs = 1);

}  // namespace ctmle
