#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctmle/estimators.hpp"

namespace ctmle {

/// A ranking of the p covariates. `scores[r]` is the statistic of covariate
/// `permutation[r]`; `flagged` lists covariates ranked last because their
/// statistic could not be computed.
struct CovariateOrdering {
  std::vector<Index> permutation;
  std::vector<double> scores;
  std::string strategy;
  std::vector<Index> flagged;

  Index size() const { return permutation.size(); }
};

/// One univariate propensity model per covariate, each used to fluctuate
/// qbar0; covariates ranked by increasing loss of the fluctuated fit.
CovariateOrdering logistic_preorder(const Dataset& ds, const QbarValues& qbar0,
                                    const TruncationBounds& truncation = {});

/// Sample partial correlation of r and wk given a. Throws std::domain_error
/// when undefined (a constant input or a perfect correlation with a).
double partial_correlation(const Vector& r, const Vector& wk, const Vector& a);
std::optional<double> try_partial_correlation(const Vector& r, const Vector& wk, const Vector& a);

/// Covariates ranked by |rho(Y - qbar0(A, W), W_k | A)|, descending.
CovariateOrdering partial_corr_preorder(const Dataset& ds, const QbarValues& qbar0);

/// Wraps a user-supplied 0-based permutation of {0, ..., p-1}.
CovariateOrdering fixed_order(std::vector<Index> permutation, Index p);

/// Reads one 1-based covariate index per line.
CovariateOrdering read_ordering_file(const std::string& path, Index p);

bool is_permutation_of(const std::vector<Index>& perm, Index p);

}  // namespace ctmle
