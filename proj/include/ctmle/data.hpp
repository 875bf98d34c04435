#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ctmle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

/// Raised for malformed or invariant-violating input data. Row and column
/// are 1-based file coordinates when known (row 1 is the first data row).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::optional<std::size_t> row = {},
                     std::optional<std::string> column = {});

  std::optional<std::size_t> row() const { return row_; }
  const std::optional<std::string>& column() const { return column_; }

 private:
  std::optional<std::size_t> row_;
  std::optional<std::string> column_;
};

/// Raised when a numerical routine cannot produce a finite answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutcomeKind { binary, bounded_continuous };

const char* to_string(OutcomeKind kind);

/// Observed data (W, A, Y). Immutable once constructed; every constructor
/// path validates the invariants.
class Dataset {
 public:
  Dataset(Matrix covariates, Vector treatment, Vector outcome,
          std::vector<std::string> covariate_names, OutcomeKind kind);

  /// Infers the outcome kind: binary when every Y is 0 or 1.
  Dataset(Matrix covariates, Vector treatment, Vector outcome,
          std::vector<std::string> covariate_names);

  const Matrix& covariates() const { return w_; }
  const Vector& treatment() const { return a_; }
  const Vector& outcome() const { return y_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  OutcomeKind outcome_kind() const { return kind_; }

  Index n() const { return static_cast<Index>(a_.size()); }
  Index p() const { return static_cast<Index>(w_.cols()); }

  Dataset subset_rows(std::span<const Index> rows) const;
  Dataset with_outcome(Vector outcome, OutcomeKind kind) const;
  Dataset select_covariates(std::span<const Index> columns) const;

  /// Index of a covariate by name; throws DataError when absent.
  Index covariate_index(const std::string& name) const;

 private:
  Matrix w_;
  Vector a_;
  Vector y_;
  std::vector<std::string> names_;
  OutcomeKind kind_;
};

Dataset load_csv(const std::string& path, const std::string& treatment_col,
                 const std::string& outcome_col);

/// Affine map of a bounded outcome onto [0, 1].
struct OutcomeScaler {
  double y_min = 0.0;
  double y_max = 1.0;

  double scale(double y) const { return (y - y_min) / (y_max - y_min); }
  double unscale(double y01) const { return y_min + y01 * (y_max - y_min); }
  double ate_factor() const { return y_max - y_min; }
};

struct OutcomeBounds {
  std::optional<double> y_min;
  std::optional<double> y_max;
};

/// Binary outcomes pass through with scaler (0, 1). Continuous outcomes use
/// the empirical range unless bounds are supplied; supplied bounds must
/// contain every observed Y.
std::pair<Dataset, OutcomeScaler> scale_outcome(const Dataset& ds,
                                                const OutcomeBounds& bounds = {});

double unscale_ate(double psi_scaled, const OutcomeScaler& scaler);

/// V-fold partition. Folds are 0-based internally.
class FoldAssignment {
 public:
  FoldAssignment(Index folds, std::vector<Index> fold_of);

  Index folds() const { return folds_; }
  Index n() const { return fold_of_.size(); }
  const std::vector<Index>& fold_of() const { return fold_of_; }

  std::vector<Index> validation_rows(Index v) const;
  std::vector<Index> training_rows(Index v) const;

  bool operator==(const FoldAssignment&) const = default;

 private:
  Index folds_;
  std::vector<Index> fold_of_;
};

FoldAssignment make_folds(Index n, Index folds, std::uint64_t seed);

/// Raw data, its [0,1]-scaled copy, and the map between them. Estimators
/// that model Y work on `scaled`; IPTW and unadjusted contrasts use `raw`.
struct EstimationInput {
  Dataset raw;
  Dataset scaled;
  OutcomeScaler scaler;
};

EstimationInput prepare_input(const Dataset& raw, const OutcomeBounds& bounds = {});

}  // namespace ctmle
