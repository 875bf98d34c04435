#include "ctmle/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace ctmle {

namespace {

std::string locate(const std::string& what, std::optional<std::size_t> row,
                   const std::optional<std::string>& column) {
  std::ostringstream os;
  os << what;
  if (row || column) {
    os << " (";
    if (row) os << "row " << *row;
    if (row && column) os << ", ";
    if (column) os << "column '" << *column << "'";
    os << ")";
  }
  return os.str();
}

bool is_binary(const Vector& v) {
  return (v.array() == 0.0 || v.array() == 1.0).all();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

DataError::DataError(const std::string& what, std::optional<std::size_t> row,
                     std::optional<std::string> column)
    : std::runtime_error(locate(what, row, column)), row_(row), column_(std::move(column)) {}

const char* to_string(OutcomeKind kind) {
  return kind == OutcomeKind::binary ? "binary" : "bounded-continuous";
}

Dataset::Dataset(Matrix covariates, Vector treatment, Vector outcome,
                 std::vector<std::string> covariate_names, OutcomeKind kind)
    : w_(std::move(covariates)),
      a_(std::move(treatment)),
      y_(std::move(outcome)),
      names_(std::move(covariate_names)),
      kind_(kind) {
  const auto n = a_.size();
  if (n < 1) throw DataError("dataset must contain at least one observation");
  if (y_.size() != n) throw DataError("outcome length differs from treatment length");
  if (w_.rows() != n && !(w_.cols() == 0))
    throw DataError("covariate matrix row count differs from treatment length");
  if (w_.cols() == 0 && w_.rows() != n) w_.resize(n, 0);
  if (static_cast<Index>(names_.size()) != static_cast<Index>(w_.cols()))
    throw DataError("covariate name count differs from covariate column count");

  std::unordered_set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) throw DataError("duplicate covariate name", {}, name);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i) + 1;
    if (!(a_[i] == 0.0 || a_[i] == 1.0)) throw DataError("treatment must be 0 or 1", row);
    if (!std::isfinite(y_[i])) throw DataError("outcome is not finite", row);
    if (kind_ == OutcomeKind::binary && !(y_[i] == 0.0 || y_[i] == 1.0))
      throw DataError("binary outcome must be 0 or 1", row);
  }
  for (Eigen::Index j = 0; j < w_.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(w_(i, j)))
        throw DataError("covariate is not finite", static_cast<std::size_t>(i) + 1,
                        names_[static_cast<std::size_t>(j)]);
    }
  }
}

Dataset::Dataset(Matrix covariates, Vector treatment, Vector outcome,
                 std::vector<std::string> covariate_names)
    : Dataset(std::move(covariates), std::move(treatment), outcome, std::move(covariate_names),
              is_binary(outcome) ? OutcomeKind::binary : OutcomeKind::bounded_continuous) {}

Dataset Dataset::subset_rows(std::span<const Index> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Matrix w(m, w_.cols());
  Vector a(m), y(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    w.row(r) = w_.row(i);
    a[r] = a_[i];
    y[r] = y_[i];
  }
  return Dataset(std::move(w), std::move(a), std::move(y), names_, kind_);
}

Dataset Dataset::with_outcome(Vector outcome, OutcomeKind kind) const {
  return Dataset(w_, a_, std::move(outcome), names_, kind);
}

Dataset Dataset::select_covariates(std::span<const Index> columns) const {
  Matrix w(w_.rows(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= p()) throw DataError("covariate index out of range");
    w.col(static_cast<Eigen::Index>(c)) = w_.col(static_cast<Eigen::Index>(columns[c]));
    names.push_back(names_[columns[c]]);
  }
  return Dataset(std::move(w), a_, y_, std::move(names), kind_);
}

Index Dataset::covariate_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DataError("unknown covariate", {}, name);
  return static_cast<Index>(it - names_.begin());
}

Dataset load_csv(const std::string& path, const std::string& treatment_col,
                 const std::string& outcome_col) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("empty file '" + path + "'", 0);

  const auto header_views = split_commas(line);
  std::vector<std::string> header(header_views.begin(), header_views.end());
  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column", 0, name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto a_col = find_col(treatment_col);
  const auto y_col = find_col(outcome_col);

  std::vector<std::size_t> w_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == a_col || c == y_col) continue;
    w_cols.push_back(c);
    names.push_back(header[c]);
  }

  std::vector<double> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++rows;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(fields.size()),
                      rows);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double value = 0.0;
      const auto f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        throw DataError("non-numeric cell '" + std::string(f) + "'", rows, header[c]);
      if (!std::isfinite(value)) throw DataError("non-finite cell", rows, header[c]);
      if (c == a_col && !(value == 0.0 || value == 1.0))
        throw DataError("treatment must be 0 or 1", rows, header[c]);
      cells.push_back(value);
    }
  }
  if (rows == 0) throw DataError("file '" + path + "' has no data rows", 0);

  const auto n = static_cast<Eigen::Index>(rows);
  const auto width = header.size();
  Matrix w(n, static_cast<Eigen::Index>(w_cols.size()));
  Vector a(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* row = cells.data() + static_cast<std::size_t>(i) * width;
    a[i] = row[a_col];
    y[i] = row[y_col];
    for (std::size_t j = 0; j < w_cols.size(); ++j)
      w(i, static_cast<Eigen::Index>(j)) = row[w_cols[j]];
  }
  return Dataset(std::move(w), std::move(a), std::move(y), std::move(names));
}

std::pair<Dataset, OutcomeScaler> scale_outcome(const Dataset& ds, const OutcomeBounds& bounds) {
  if (ds.outcome_kind() == OutcomeKind::binary) return {ds, OutcomeScaler{0.0, 1.0}};

  const Vector& y = ds.outcome();
  const double lo_obs = y.minCoeff();
  const double hi_obs = y.maxCoeff();
  const double lo = bounds.y_min.value_or(lo_obs);
  const double hi = bounds.y_max.value_or(hi_obs);
  if (!(hi > lo)) throw DataError("degenerate outcome: upper bound does not exceed lower bound");
  if (lo_obs < lo || hi_obs > hi) throw DataError("outcome bounds do not contain every observed Y");

  OutcomeScaler scaler{lo, hi};
  Vector scaled = (y.array() - lo) / (hi - lo);
  return {ds.with_outcome(std::move(scaled), OutcomeKind::bounded_continuous), scaler};
}

double unscale_ate(double psi_scaled, const OutcomeScaler& scaler) {
  return psi_scaled * scaler.ate_factor();
}

FoldAssignment::FoldAssignment(Index folds, std::vector<Index> fold_of)
    : folds_(folds), fold_of_(std::move(fold_of)) {
  if (folds_ < 2) throw std::invalid_argument("fold count must be at least 2");
  std::vector<Index> sizes(folds_, 0);
  for (auto f : fold_of_) {
    if (f >= folds_) throw std::invalid_argument("fold label out of range");
    ++sizes[f];
  }
  if (std::find(sizes.begin(), sizes.end(), Index{0}) != sizes.end())
    throw std::invalid_argument("every fold must be nonempty");
}

std::vector<Index> FoldAssignment::validation_rows(Index v) const {
  std::vector<Index> rows;
  for (Index i = 0; i < fold_of_.size(); ++i)
    if (fold_of_[i] == v) rows.push_back(i);
  return rows;
}

std::vector<Index> FoldAssignment::training_rows(Index v) const {
  std::vector<Index> rows;
  for (Index i = 0; i < fold_of_.size(); ++i)
    if (fold_of_[i] != v) rows.push_back(i);
  return rows;
}

FoldAssignment make_folds(Index n, Index folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("fold count must be at least 2");
  if (folds > n) throw std::invalid_argument("fold count exceeds sample size");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend
  // on the standard library's shuffle implementation.
  for (Index i = n; i > 1; --i) {
    const Index j = static_cast<Index>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Index> fold_of(n);
  for (Index pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % folds;
  return FoldAssignment(folds, std::move(fold_of));
}

EstimationInput prepare_input(const Dataset& raw, const OutcomeBounds& bounds) {
  auto [scaled, scaler] = scale_outcome(raw, bounds);
  return EstimationInput{raw, std::move(scaled), scaler};
}

}  // namespace ctmle
