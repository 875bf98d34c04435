#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctmle/estimators.hpp"
#include "ctmle/preorder.hpp"
#include "ctmle/tmle.hpp"

namespace ctmle {

/// Forward stepwise search: every unused covariate is trialed at each step.
struct GreedySearch {};

/// A data-adaptive ordering computed from the full data and the initial Q.
enum class OrderingRule { logistic, partial_correlation };

using SearchStrategy = std::variant<GreedySearch, OrderingRule, CovariateOrdering>;

std::string strategy_label(const SearchStrategy& s);

enum class Criterion { rss, nll };

/// How the cross-validated EIC variance enters the total: `sum` adds
/// sum_i D*^2 over all validation rows; `mean` divides that sum by n, so the
/// penalty is on the scale of n times the estimator variance.
enum class VarianceScale { sum, mean };

struct CtmleOptions {
  SearchStrategy strategy = GreedySearch{};
  Index folds = 5;
  std::optional<Index> patience;
  Index step_size = 1;  // pre-ordered strategies only
  TruncationBounds truncation;
  std::uint64_t seed = 1;
  Criterion criterion = Criterion::rss;
  VarianceScale variance_scale = VarianceScale::mean;
  bool diagnostics = false;
};

void validate(const CtmleOptions& opts);

/// Element k of the candidate sequence: the PS model on `covariate_set`,
/// the initial-Q version it fluctuated, and the resulting targeted Q.
struct CandidateTriplet {
  Index k = 0;
  std::vector<Index> covariate_set;
  PropensityFit g_fit;
  Vector ps_coefficients;  // intercept first, then covariate_set order
  Index qbar_init_version = 0;
  double epsilon = 0.0;
  double empirical_loss = 0.0;
  LogitQbar targeted;
};

double candidate_psi(const CandidateTriplet& c);

struct SelectionScore {
  Index k = 0;
  double cv_rss = 0.0;
  double cv_var = 0.0;
  double cv_bias = 0.0;
  double total = 0.0;
};

/// `ps_fits` counts fitted logistic PS models (the closed-form intercept-only
/// model at k = 0 is not counted); `resets` counts initial-Q resets and
/// `reset_fits` the PS fits repeated after them.
struct SequenceStats {
  Index ps_fits = 0;
  Index resets = 0;
  Index reset_fits = 0;
  Index failed_fits = 0;

  SequenceStats& operator+=(const SequenceStats& o) {
    ps_fits += o.ps_fits;
    resets += o.resets;
    reset_fits += o.reset_fits;
    failed_fits += o.failed_fits;
    return *this;
  }
};

using ResolvedStrategy = std::variant<GreedySearch, CovariateOrdering>;

ResolvedStrategy resolve_strategy(const SearchStrategy& s, const Dataset& ds, const QbarValues& qbar0,
                                  const TruncationBounds& truncation);

/// Builds the candidate sequence on `train` one step at a time. When
/// `eval` is given, each candidate is also evaluated on those rows.
class SequenceBuilder {
 public:
  SequenceBuilder(Dataset train, LogitQbar initial, ResolvedStrategy strategy, Index step_size,
                  TruncationBounds truncation, std::optional<Dataset> eval = std::nullopt,
                  LogitQbar eval_initial = {});

  /// Number of candidates in the complete sequence.
  Index length() const { return length_; }
  bool done() const { return next_k_ >= length_; }

  const CandidateTriplet& next();
  const CandidateTriplet& current() const { return current_; }

  /// Targeted Q of the current candidate on the evaluation rows.
  const LogitQbar& eval_targeted() const { return eval_targeted_; }
  const SequenceStats& stats() const { return stats_; }

 private:
  struct Trial {
    std::vector<Index> covariates;
    PropensityFit g;
    std::shared_ptr<const GrowingLogistic> ps;
    Fluctuation fluct;
    CleverCovariates h;
  };

  std::optional<Trial> try_set(std::vector<Index> covariates, const LogitQbar& initial);
  Trial intercept_only(const LogitQbar& initial) const;
  std::optional<Trial> best_trial(const LogitQbar& initial);
  void reset_initial();
  void commit(Trial trial);

  Dataset train_;
  std::optional<Dataset> eval_;
  ResolvedStrategy strategy_;
  Index step_size_;
  TruncationBounds truncation_;
  Index length_ = 0;
  Index next_k_ = 0;

  LogitQbar initial_;
  LogitQbar eval_initial_;
  Index version_ = 0;
  std::vector<Index> selected_;
  std::vector<bool> used_;
  Index order_pos_ = 0;
  std::shared_ptr<const GrowingLogistic> ps_;

  CandidateTriplet current_;
  LogitQbar eval_targeted_;
  SequenceStats stats_;
};

/// The complete full-data sequence (no cross-validation, no early stop).
std::vector<CandidateTriplet> build_sequence(const Dataset& ds, const QbarValues& qbar0,
                                             const CtmleOptions& opts, SequenceStats* stats = nullptr);

/// Initial Q fitted on the full data and on every training fold.
struct FoldInitial {
  Dataset train;
  Dataset validation;
  std::vector<Index> validation_rows;
  LogitQbar train_initial;
  LogitQbar validation_initial;
};

struct InitialFits {
  QbarValues full;
  FoldAssignment folds;
  std::vector<FoldInitial> per_fold;
};

InitialFits fit_initials(const Dataset& ds, const OutcomeModelSpec& qbar_spec, const FoldAssignment& folds);

/// Candidate sequence and selection scores for one strategy; scoring stops
/// early when `opts.patience` is set.
struct SequenceRun {
  std::string label;
  std::optional<CovariateOrdering> ordering;
  std::vector<CandidateTriplet> candidates;
  std::vector<SelectionScore> scores;
  SequenceStats full_stats;
  SequenceStats cv_stats;
  bool stopped_early = false;
};

SequenceRun run_sequence(const Dataset& ds, const InitialFits& initials, const ResolvedStrategy& strategy,
                         const CtmleOptions& opts, std::string label);

std::vector<SelectionScore> cv_scores(const Dataset& ds, const OutcomeModelSpec& qbar_spec,
                                      const CtmleOptions& opts, const FoldAssignment& folds);

/// Argmin of the total; ties go to the smaller k.
Index select_candidate(const std::vector<SelectionScore>& scores);

struct CtmleResult {
  EstimateReport report;
  std::vector<CandidateTriplet> candidates;
  std::vector<SelectionScore> scores;
  Index k_selected = 0;
  SequenceStats full_stats;
  SequenceStats cv_stats;
  FoldAssignment folds;
  std::optional<CovariateOrdering> ordering;
  bool stopped_early = false;
};

CtmleResult run_ctmle_detailed(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                               const CtmleOptions& opts);
EstimateReport run_ctmle(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                         const CtmleOptions& opts);

/// C-TMLE covariate selection followed by IPTW on a PS refit to the
/// selected covariates.
EstimateReport iptw_post_selection(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                                   const CtmleOptions& opts);

/// Influence-curve report for a full-data candidate, on the raw scale.
EstimateReport candidate_report(const CandidateTriplet& c, const EstimationInput& input);

nlohmann::json scores_to_json(const std::vector<SelectionScore>& scores);

}  // namespace ctmle
