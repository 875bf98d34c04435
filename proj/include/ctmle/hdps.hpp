#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "ctmle/data.hpp"

namespace ctmle {

using CountMatrix = Eigen::SparseMatrix<int, Eigen::ColMajor>;

/// Patient-by-code claim counts. Column c holds code `code_ids[c]`, which
/// belongs to cluster `cluster_of[c]`.
struct ClaimMatrix {
  CountMatrix counts;
  std::vector<std::string> code_ids;
  std::vector<std::string> cluster_of;

  Index n() const { return static_cast<Index>(counts.rows()); }
  Index codes() const { return static_cast<Index>(counts.cols()); }

  /// Throws DataError on negative counts, duplicate codes or size mismatch.
  void validate() const;
  std::vector<int> column(Index c) const;
};

enum class RecurrenceKind { ever, above_median, above_q75 };

const char* to_string(RecurrenceKind kind);

struct HdpsCovariate {
  std::string source_code;
  RecurrenceKind kind = RecurrenceKind::ever;
  Vector values;
  std::optional<double> bross_score;  // empty when undefined

  std::string name() const;
};

/// Lower-interpolation quantile x_(floor(q (n - 1))) of the sorted values.
double lower_quantile(std::vector<int> values, double q);

/// Top J codes per cluster by min(Pr, 1 - Pr), where Pr is the share of
/// patients with a positive count. Returns column indices, grouped by
/// cluster label and ranked within each cluster.
std::vector<Index> prevalence_screen(const ClaimMatrix& claims, Index J);

/// [count > 0], [count > median], [count > q75].
std::array<Vector, 3> recurrence_expand(const std::vector<int>& counts);

/// Bross multiplicative confounding bias for a binary covariate. Empty when
/// the outcome risk ratio is undefined. Throws std::invalid_argument when a
/// treatment arm is empty.
std::optional<double> bross_score(const Vector& c, const Vector& a, const Vector& y);

struct HdpsOptions {
  Index J = 50;
  Index K = 100;
  bool raw_ranking = false;  // rank by the score itself instead of max(s, 1/s)
};

struct HdpsResult {
  Matrix design;                       // n x (selected columns)
  std::vector<HdpsCovariate> columns;  // same order as design
  std::vector<Index> screened;         // code columns kept by screening
  Index candidates = 0;                // expanded covariates scored
};

/// Value used for ranking; undefined scores sort last.
std::optional<double> ranking_statistic(const std::optional<double>& score, bool raw_ranking);

HdpsResult hdps_pipeline(const ClaimMatrix& claims, const Vector& a, const Vector& y, const HdpsOptions& opts);

/// Long-format claims CSV with header patient_id,code,cluster,count. Rows for
/// patients outside `patient_ids` are a DataError; patients without rows get
/// zero counts.
ClaimMatrix read_claims_csv(const std::string& path, const std::vector<std::string>& patient_ids);

/// Two-column CSV (patient_id, value). Returns ids in file order.
std::pair<std::vector<std::string>, Vector> read_patient_values(const std::string& path);

void write_claims_csv(const std::string& path, const ClaimMatrix& claims, const std::vector<std::string>& patient_ids);

/// Wide CSV (patient_id plus one 0/1 column per selected covariate) and a
/// sidecar JSON at `path + ".json"` with code, kind and score per column.
void write_hdps_output(const std::string& path, const std::vector<std::string>& patient_ids,
                       const HdpsResult& result);

nlohmann::json provenance_json(const HdpsResult& result);

}  // namespace ctmle
