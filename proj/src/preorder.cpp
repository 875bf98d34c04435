#include "ctmle/preorder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ctmle/tmle.hpp"

namespace ctmle {

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

std::optional<double> pearson(const Vector& x, const Vector& y) {
  const Eigen::ArrayXd xc = x.array() - x.mean();
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double sxx = xc.square().sum();
  const double syy = yc.square().sum();
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return (xc * yc).sum() / std::sqrt(sxx * syy);
}

// Orders covariates by `better(score_a, score_b)`; undefined (NaN) scores go
// last; ties fall back to covariate index.
template <class Better>
CovariateOrdering rank(const std::vector<double>& score_of, std::string strategy, Better better) {
  const Index p = score_of.size();
  std::vector<Index> perm(p);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    const bool ua = std::isnan(score_of[a]);
    const bool ub = std::isnan(score_of[b]);
    if (ua != ub) return ub;
    if (ua) return a < b;
    if (score_of[a] != score_of[b]) return better(score_of[a], score_of[b]);
    return a < b;
  });
  CovariateOrdering out;
  out.strategy = std::move(strategy);
  out.permutation = perm;
  for (auto j : perm) {
    out.scores.push_back(score_of[j]);
    if (std::isnan(score_of[j])) out.flagged.push_back(j);
  }
  return out;
}

}  // namespace

CovariateOrdering logistic_preorder(const Dataset& ds, const QbarValues& qbar0,
                                    const TruncationBounds& truncation) {
  if (ds.p() < 1) throw std::invalid_argument("logistic_preorder needs at least one covariate");
  const LogitQbar initial = to_logit(qbar0);
  std::vector<double> loss(ds.p(), kUndefined);
  for (Index k = 0; k < ds.p(); ++k) {
    try {
      const PropensityModel ps = fit_propensity_model(ds, {k});
      const PropensityFit g = make_propensity(predict_propensity(ps, ds), truncation);
      const CleverCovariates h = clever_covariates(g.g1, ds.treatment());
      loss[k] = fluctuate(initial, h, ds.outcome()).loss;
    } catch (const std::exception&) {
      loss[k] = kUndefined;
    }
  }
  return rank(loss, "logistic", std::less<double>());
}

std::optional<double> try_partial_correlation(const Vector& r, const Vector& wk, const Vector& a) {
  if (r.size() != wk.size() || r.size() != a.size())
    throw std::invalid_argument("partial_correlation: length mismatch");
  const auto r_wk = pearson(r, wk);
  const auto r_a = pearson(r, a);
  const auto wk_a = pearson(wk, a);
  if (!r_wk || !r_a || !wk_a) return std::nullopt;
  const double denom = (1.0 - *r_a * *r_a) * (1.0 - *wk_a * *wk_a);
  if (denom <= 1e-12) return std::nullopt;
  return (*r_wk - *r_a * *wk_a) / std::sqrt(denom);
}

double partial_correlation(const Vector& r, const Vector& wk, const Vector& a) {
  auto rho = try_partial_correlation(r, wk, a);
  if (!rho) throw std::domain_error("partial correlation undefined (constant or collinear input)");
  return *rho;
}

CovariateOrdering partial_corr_preorder(const Dataset& ds, const QbarValues& qbar0) {
  if (ds.p() < 1) throw std::invalid_argument("partial_corr_preorder needs at least one covariate");
  const Vector residual = ds.outcome() - qbar0.observed;
  std::vector<double> score(ds.p(), kUndefined);
  for (Index k = 0; k < ds.p(); ++k) {
    const auto rho = try_partial_correlation(residual, ds.covariates().col(static_cast<Eigen::Index>(k)),
                                             ds.treatment());
    if (rho) score[k] = std::abs(*rho);
  }
  return rank(score, "partial-corr", std::greater<double>());
}

bool is_permutation_of(const std::vector<Index>& perm, Index p) {
  if (perm.size() != p) return false;
  std::vector<bool> seen(p, false);
  for (auto j : perm) {
    if (j >= p || seen[j]) return false;
    seen[j] = true;
  }
  return true;
}

CovariateOrdering fixed_order(std::vector<Index> permutation, Index p) {
  if (!is_permutation_of(permutation, p))
    throw std::invalid_argument("ordering is not a permutation of the covariates");
  CovariateOrdering out;
  out.strategy = "fixed";
  out.scores.resize(p);
  for (Index r = 0; r < p; ++r) out.scores[r] = static_cast<double>(r);
  out.permutation = std::move(permutation);
  return out;
}

CovariateOrdering read_ordering_file(const std::string& path, Index p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ordering file '" + path + "'");
  std::vector<Index> perm;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(line, &used);
      if (v < 1) throw std::invalid_argument("index below 1");
      perm.push_back(static_cast<Index>(v - 1));
    } catch (const std::exception&) {
      throw DataError("ordering entries must be 1-based covariate indices", row);
    }
  }
  try {
    return fixed_order(std::move(perm), p);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string(e.what()) + " in '" + path + "'");
  }
}

}  // namespace ctmle
