#include "ctmle/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmle {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix columns_of(const Matrix& w, const std::vector<Index>& cols) {
  Matrix X(w.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = w.col(static_cast<Eigen::Index>(cols[j]));
  return X;
}

std::string method_name(const std::string& label) {
  if (label == "partial-corr") return "ctmle-partcorr";
  return "ctmle-" + label;
}

nlohmann::json covariate_names(const Dataset& ds, const std::vector<Index>& set) {
  nlohmann::json names = nlohmann::json::array();
  for (auto j : set) names.push_back(ds.covariate_names()[j]);
  return names;
}

SelectionScore score_step(const Dataset& ds, const CandidateTriplet& full,
                          const std::vector<SequenceBuilder>& fold_builders,
                          const InitialFits& initials, Criterion criterion, VarianceScale variance_scale) {
  SelectionScore s;
  s.k = full.k;
  const double psi_full = candidate_psi(full);
  double psi_sum = 0.0;
  for (std::size_t v = 0; v < fold_builders.size(); ++v) {
    const auto& fold = initials.per_fold[v];
    const auto& builder = fold_builders[v];
    const LogitQbar& q = builder.eval_targeted();
    const Vector& y = fold.validation.outcome();
    const Vector& a = fold.validation.treatment();
    const Vector p_obs = expit(q.observed);

    if (criterion == Criterion::rss)
      s.cv_rss += (y - p_obs).squaredNorm();
    else
      s.cv_rss += -log_likelihood(y, q.observed);

    const double psi_v = candidate_psi(builder.current());
    psi_sum += psi_v;

    Vector g1(static_cast<Eigen::Index>(fold.validation_rows.size()));
    for (std::size_t r = 0; r < fold.validation_rows.size(); ++r)
      g1[static_cast<Eigen::Index>(r)] = full.g_fit.g1[static_cast<Eigen::Index>(fold.validation_rows[r])];
    const CleverCovariates h = clever_covariates(g1, a);
    const Eigen::ArrayXd d = h.observed.array() * (y - p_obs).array() + expit(q.treated).array() -
                             expit(q.control).array() - psi_v;
    s.cv_var += d.square().sum();
  }
  if (variance_scale == VarianceScale::mean) s.cv_var /= static_cast<double>(ds.n());
  s.cv_bias = psi_sum / static_cast<double>(fold_builders.size()) - psi_full;
  s.total = s.cv_rss + s.cv_var + static_cast<double>(ds.n()) * s.cv_bias * s.cv_bias;
  return s;
}

}  // namespace

std::string strategy_label(const SearchStrategy& s) {
  return std::visit(Overloaded{[](const GreedySearch&) { return std::string("greedy"); },
                               [](const OrderingRule& r) {
                                 return std::string(r == OrderingRule::logistic ? "logistic" : "partial-corr");
                               },
                               [](const CovariateOrdering& o) { return o.strategy; }},
                    s);
}

void validate(const CtmleOptions& opts) {
  if (opts.step_size < 1) throw std::invalid_argument("step size must be at least 1");
  if (opts.patience && *opts.patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (opts.folds < 2) throw std::invalid_argument("fold count must be at least 2");
  validate(opts.truncation);
}

double candidate_psi(const CandidateTriplet& c) {
  return (expit(c.targeted.treated) - expit(c.targeted.control)).mean();
}

ResolvedStrategy resolve_strategy(const SearchStrategy& s, const Dataset& ds, const QbarValues& qbar0,
                                  const TruncationBounds& truncation) {
  return std::visit(
      Overloaded{[](const GreedySearch& g) -> ResolvedStrategy { return g; },
                 [&](const OrderingRule& r) -> ResolvedStrategy {
                   if (ds.p() == 0) return CovariateOrdering{{}, {}, strategy_label(r), {}};
                   return r == OrderingRule::logistic ? logistic_preorder(ds, qbar0, truncation)
                                                      : partial_corr_preorder(ds, qbar0);
                 },
                 [&](const CovariateOrdering& o) -> ResolvedStrategy {
                   if (!is_permutation_of(o.permutation, ds.p()))
                     throw std::invalid_argument("ordering is not a permutation of the covariates");
                   return o;
                 }},
      s);
}

SequenceBuilder::SequenceBuilder(Dataset train, LogitQbar initial, ResolvedStrategy strategy, Index step_size,
                                 TruncationBounds truncation, std::optional<Dataset> eval,
                                 LogitQbar eval_initial)
    : train_(std::move(train)),
      eval_(std::move(eval)),
      strategy_(std::move(strategy)),
      step_size_(step_size),
      truncation_(truncation),
      initial_(std::move(initial)),
      eval_initial_(std::move(eval_initial)),
      used_(train_.p(), false) {
  if (step_size_ < 1) throw std::invalid_argument("step size must be at least 1");
  const Index p = train_.p();
  if (std::holds_alternative<GreedySearch>(strategy_)) {
    length_ = p + 1;
  } else {
    const auto& order = std::get<CovariateOrdering>(strategy_);
    if (!is_permutation_of(order.permutation, p))
      throw std::invalid_argument("ordering is not a permutation of the covariates");
    length_ = (p + step_size_ - 1) / step_size_ + 1;
  }
}

std::optional<SequenceBuilder::Trial> SequenceBuilder::try_set(std::vector<Index> covariates,
                                                               const LogitQbar& initial) {
  ++stats_.ps_fits;
  std::vector<Index> added(covariates.begin() + (ps_->coefficients().size() - 1), covariates.end());

  Trial t;
  try {
    t.ps = std::make_shared<const GrowingLogistic>(ps_->extend(columns_of(train_.covariates(), added), train_.treatment()));
    t.g = make_propensity(t.ps->fitted(), truncation_);
  } catch (const std::exception&) {
    ++stats_.failed_fits;
    return std::nullopt;
  }
  t.covariates = std::move(covariates);
  t.h = clever_covariates(t.g.g1, train_.treatment());
  t.fluct = fluctuate(initial, t.h, train_.outcome());
  return t;
}

SequenceBuilder::Trial SequenceBuilder::intercept_only(const LogitQbar& initial) const {
  Trial t;
  const double mean_a = train_.treatment().mean();
  t.g = make_propensity(Vector::Constant(static_cast<Eigen::Index>(train_.n()), mean_a), truncation_);
  t.ps = std::make_shared<const GrowingLogistic>(train_.treatment());
  t.h = clever_covariates(t.g.g1, train_.treatment());
  t.fluct = fluctuate(initial, t.h, train_.outcome());
  return t;
}

std::optional<SequenceBuilder::Trial> SequenceBuilder::best_trial(const LogitQbar& initial) {
  std::optional<Trial> best;
  auto consider = [&](std::vector<Index> set) {
    auto t = try_set(std::move(set), initial);
    if (t && (!best || t->fluct.loss < best->fluct.loss)) best = std::move(t);
  };
  std::vector<Index> fallback = selected_;
  if (std::holds_alternative<GreedySearch>(strategy_)) {
    for (Index j = 0; j < train_.p(); ++j) {
      if (used_[j]) continue;
      if (fallback.size() == selected_.size()) fallback.push_back(j);
      auto set = selected_;
      set.push_back(j);
      consider(std::move(set));
    }
  } else {
    const auto& order = std::get<CovariateOrdering>(strategy_).permutation;
    auto set = selected_;
    for (Index r = order_pos_; r < std::min<Index>(order_pos_ + step_size_, order.size()); ++r) set.push_back(order[r]);
    fallback = set;
    consider(std::move(set));
  }
  if (best) return best;

  // Every fit failed: keep the previous PS and still advance the covariate set.
  Trial t;
  t.covariates = std::move(fallback);
  t.g = current_.g_fit;
  t.ps = ps_;
  t.h = clever_covariates(t.g.g1, train_.treatment());
  t.fluct = fluctuate(initial, t.h, train_.outcome());
  return t;
}

void SequenceBuilder::reset_initial() {
  initial_ = current_.targeted;
  eval_initial_ = eval_targeted_;
  ++version_;
  ++stats_.resets;
}

const CandidateTriplet& SequenceBuilder::next() {
  if (done()) throw std::logic_error("candidate sequence already complete");
  if (next_k_ == 0) {
    commit(intercept_only(initial_));
    return current_;
  }
  Trial trial = *best_trial(initial_);
  if (trial.fluct.loss > current_.empirical_loss) {
    reset_initial();
    const Index before = stats_.ps_fits;
    trial = *best_trial(initial_);
    stats_.reset_fits += stats_.ps_fits - before;
    if (trial.fluct.loss > current_.empirical_loss) {
      // Round-off only: epsilon = 0 reproduces the previous candidate's loss.
      trial.fluct.epsilon = 0.0;
      trial.fluct.updated = initial_;
      trial.fluct.loss = current_.empirical_loss;
    }
  }
  commit(std::move(trial));
  return current_;
}

void SequenceBuilder::commit(Trial trial) {
  const Index added = trial.covariates.size() - selected_.size();
  selected_ = trial.covariates;
  for (auto j : selected_) used_[j] = true;
  if (!std::holds_alternative<GreedySearch>(strategy_)) order_pos_ += added;
  ps_ = trial.ps;
  const Index fitted_cols = ps_->coefficients().size() - 1;

  if (eval_) {
    Vector g1_raw;
    if (selected_.empty()) {
      g1_raw = Vector::Constant(static_cast<Eigen::Index>(eval_->n()), trial.g.g1[0]);
    } else {
      LogisticFit f;
      f.intercept = true;
      f.coefficients = ps_->coefficients();
      const std::vector<Index> fitted(selected_.begin(), selected_.begin() + fitted_cols);
      g1_raw = predict_proba(f, columns_of(eval_->covariates(), fitted));
    }
    const PropensityFit g_eval = make_propensity(g1_raw, truncation_);
    const CleverCovariates h_eval = clever_covariates(g_eval.g1, eval_->treatment());
    eval_targeted_ = apply_fluctuation(eval_initial_, h_eval, trial.fluct.epsilon);
  }

  current_.k = next_k_;
  current_.covariate_set = selected_;
  current_.g_fit = std::move(trial.g);
  current_.ps_coefficients = ps_->coefficients();
  current_.qbar_init_version = version_;
  current_.epsilon = trial.fluct.epsilon;
  current_.empirical_loss = trial.fluct.loss;
  current_.targeted = std::move(trial.fluct.updated);
  ++next_k_;
}

std::vector<CandidateTriplet> build_sequence(const Dataset& ds, const QbarValues& qbar0,
                                             const CtmleOptions& opts, SequenceStats* stats) {
  validate(opts);
  SequenceBuilder builder(ds, to_logit(qbar0), resolve_strategy(opts.strategy, ds, qbar0, opts.truncation),
                          opts.step_size, opts.truncation);
  std::vector<CandidateTriplet> out;
  while (!builder.done()) out.push_back(builder.next());
  if (stats) *stats = builder.stats();
  return out;
}

InitialFits fit_initials(const Dataset& ds, const OutcomeModelSpec& qbar_spec, const FoldAssignment& folds) {
  if (folds.n() != ds.n()) throw std::invalid_argument("fold assignment size differs from dataset size");
  InitialFits out{predict_outcome(fit_outcome_model(qbar_spec, ds), ds), folds, {}};
  for (Index v = 0; v < folds.folds(); ++v) {
    const auto train_rows = folds.training_rows(v);
    auto val_rows = folds.validation_rows(v);
    Dataset train = ds.subset_rows(train_rows);
    Dataset val = ds.subset_rows(val_rows);
    const OutcomeModel model = fit_outcome_model(qbar_spec, train);
    LogitQbar train_init = to_logit(predict_outcome(model, train));
    LogitQbar val_init = to_logit(predict_outcome(model, val));
    out.per_fold.push_back(FoldInitial{std::move(train), std::move(val), std::move(val_rows),
                                       std::move(train_init), std::move(val_init)});
  }
  return out;
}

SequenceRun run_sequence(const Dataset& ds, const InitialFits& initials, const ResolvedStrategy& strategy,
                         const CtmleOptions& opts, std::string label) {
  validate(opts);
  SequenceRun run;
  run.label = std::move(label);
  if (const auto* o = std::get_if<CovariateOrdering>(&strategy)) run.ordering = *o;

  SequenceBuilder full(ds, to_logit(initials.full), strategy, opts.step_size, opts.truncation);
  std::vector<SequenceBuilder> folds;
  folds.reserve(initials.per_fold.size());
  for (const auto& f : initials.per_fold)
    folds.emplace_back(f.train, f.train_initial, strategy, opts.step_size, opts.truncation, f.validation,
                       f.validation_initial);

  Index best_k = 0;
  double best_total = std::numeric_limits<double>::infinity();
  while (!full.done()) {
    run.candidates.push_back(full.next());
    for (auto& b : folds) b.next();
    const SelectionScore s = score_step(ds, run.candidates.back(), folds, initials, opts.criterion, opts.variance_scale);
    run.scores.push_back(s);
    if (s.total < best_total) {
      best_total = s.total;
      best_k = s.k;
    } else if (opts.patience && s.k - best_k >= *opts.patience && !full.done()) {
      run.stopped_early = true;
      break;
    }
  }
  run.full_stats = full.stats();
  for (const auto& b : folds) run.cv_stats += b.stats();
  return run;
}

std::vector<SelectionScore> cv_scores(const Dataset& ds, const OutcomeModelSpec& qbar_spec,
                                      const CtmleOptions& opts, const FoldAssignment& folds) {
  const InitialFits initials = fit_initials(ds, qbar_spec, folds);
  const ResolvedStrategy strategy = resolve_strategy(opts.strategy, ds, initials.full, opts.truncation);
  CtmleOptions unstopped = opts;
  unstopped.patience.reset();
  return run_sequence(ds, initials, strategy, unstopped, strategy_label(opts.strategy)).scores;
}

Index select_candidate(const std::vector<SelectionScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("select_candidate: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const bool better = scores[i].total < scores[best].total ||
                        (scores[i].total == scores[best].total && scores[i].k < scores[best].k);
    if (better || std::isnan(scores[best].total)) best = i;
  }
  return scores[best].k;
}

EstimateReport candidate_report(const CandidateTriplet& c, const EstimationInput& input) {
  const QbarValues q = to_probability(c.targeted);
  const double psi = gcomp(q);
  EstimateReport r = ic_inference(eic_values(q, c.g_fit, psi, input.scaled), psi);
  return unscale_report(std::move(r), input.scaler);
}

nlohmann::json scores_to_json(const std::vector<SelectionScore>& scores) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& s : scores)
    table.push_back({{"k", s.k}, {"cv_rss", s.cv_rss}, {"cv_var", s.cv_var}, {"cv_bias", s.cv_bias}, {"total", s.total}});
  return table;
}

CtmleResult run_ctmle_detailed(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                               const CtmleOptions& opts) {
  validate(opts);
  const Dataset& ds = input.scaled;
  CtmleResult out{EstimateReport{}, {}, {}, 0, {}, {}, make_folds(ds.n(), opts.folds, opts.seed), std::nullopt, false};
  const InitialFits initials = fit_initials(ds, qbar_spec, out.folds);
  const ResolvedStrategy strategy = resolve_strategy(opts.strategy, ds, initials.full, opts.truncation);
  SequenceRun run = run_sequence(ds, initials, strategy, opts, strategy_label(opts.strategy));

  out.k_selected = select_candidate(run.scores);
  const CandidateTriplet& chosen = run.candidates[out.k_selected];
  out.report = candidate_report(chosen, input);
  out.report.method = method_name(run.label);
  out.report.k_selected = out.k_selected;
  out.report.strategy_selected = run.label;
  auto& d = out.report.diagnostics;
  d["covariate_set"] = covariate_names(ds, chosen.covariate_set);
  d["epsilon"] = chosen.epsilon;
  d["qbar_init_version"] = chosen.qbar_init_version;
  d["ps_fits"] = run.full_stats.ps_fits;
  d["cv_ps_fits"] = run.cv_stats.ps_fits;
  d["resets"] = run.full_stats.resets;
  d["reset_fits"] = run.full_stats.reset_fits;
  d["candidates_scored"] = run.scores.size();
  d["stopped_early"] = run.stopped_early;
  if (opts.diagnostics) d["scores"] = scores_to_json(run.scores);

  out.candidates = std::move(run.candidates);
  out.scores = std::move(run.scores);
  out.full_stats = run.full_stats;
  out.cv_stats = run.cv_stats;
  out.ordering = std::move(run.ordering);
  out.stopped_early = run.stopped_early;
  return out;
}

EstimateReport run_ctmle(const EstimationInput& input, const OutcomeModelSpec& qbar_spec, const CtmleOptions& opts) {
  return run_ctmle_detailed(input, qbar_spec, opts).report;
}

EstimateReport iptw_post_selection(const EstimationInput& input, const OutcomeModelSpec& qbar_spec,
                                   const CtmleOptions& opts) {
  const CtmleResult selection = run_ctmle_detailed(input, qbar_spec, opts);
  const auto& set = selection.candidates[selection.k_selected].covariate_set;
  const PropensityModel ps = fit_propensity_model(input.raw, set);
  const PropensityFit g = make_propensity(predict_propensity(ps, input.raw), opts.truncation);
  const double psi = iptw(g, input.raw);
  EstimateReport r = ic_inference(iptw_ic(g, input.raw, psi), psi);
  r.method = "iptw-ctmle";
  r.k_selected = selection.k_selected;
  r.strategy_selected = selection.report.strategy_selected;
  r.diagnostics["covariate_set"] = covariate_names(input.raw, set);
  r.diagnostics["ps_truncated"] = g.truncated_count;
  return r;
}

}  // namespace ctmle
