#include "ctmle/hdps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace ctmle {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    const auto first = field.find_first_not_of(' ');
    fields.push_back(first == std::string::npos ? std::string() : field.substr(first));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <class T>
T parse_number(const std::string& s, std::size_t row, const std::string& column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("cannot parse '" + s + "' as a number", row, column);
  return value;
}

}  // namespace

void ClaimMatrix::validate() const {
  if (code_ids.size() != codes() || cluster_of.size() != codes())
    throw DataError("claim matrix labels do not match its column count");
  std::set<std::string> seen;
  for (const auto& id : code_ids)
    if (!seen.insert(id).second) throw DataError("duplicate claim code '" + id + "'");
  for (int k = 0; k < counts.outerSize(); ++k)
    for (CountMatrix::InnerIterator it(counts, k); it; ++it)
      if (it.value() < 0) throw DataError("negative claim count", static_cast<std::size_t>(it.row()) + 1, code_ids[k]);
}

std::vector<int> ClaimMatrix::column(Index c) const {
  std::vector<int> out(n(), 0);
  for (CountMatrix::InnerIterator it(counts, static_cast<int>(c)); it; ++it) out[static_cast<Index>(it.row())] = it.value();
  return out;
}

const char* to_string(RecurrenceKind kind) {
  switch (kind) {
    case RecurrenceKind::ever: return "ever";
    case RecurrenceKind::above_median: return "above_median";
    case RecurrenceKind::above_q75: return "above_q75";
  }
  return "?";
}

std::string HdpsCovariate::name() const { return source_code + "_" + to_string(kind); }

double lower_quantile(std::vector<int> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  const auto pos = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(pos), values.end());
  return values[pos];
}

std::vector<Index> prevalence_screen(const ClaimMatrix& claims, Index J) {
  if (J < 1) throw std::invalid_argument("J must be at least 1");
  const double n = static_cast<double>(claims.n());
  std::map<std::string, std::vector<Index>> by_cluster;
  std::vector<double> score(claims.codes());
  for (Index c = 0; c < claims.codes(); ++c) {
    Index positive = 0;
    for (CountMatrix::InnerIterator it(claims.counts, static_cast<int>(c)); it; ++it)
      if (it.value() > 0) ++positive;
    const double pr = n > 0 ? static_cast<double>(positive) / n : 0.0;
    score[c] = std::min(pr, 1.0 - pr);
    by_cluster[claims.cluster_of[c]].push_back(c);
  }
  std::vector<Index> kept;
  for (auto& [cluster, cols] : by_cluster) {
    std::sort(cols.begin(), cols.end(), [&](Index x, Index y) {
      if (score[x] != score[y]) return score[x] > score[y];
      return claims.code_ids[x] < claims.code_ids[y];
    });
    cols.resize(std::min(J, cols.size()));
    kept.insert(kept.end(), cols.begin(), cols.end());
  }
  return kept;
}

std::array<Vector, 3> recurrence_expand(const std::vector<int>& counts) {
  const auto n = static_cast<Eigen::Index>(counts.size());
  std::array<Vector, 3> out{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  if (counts.empty()) return out;
  const double median = lower_quantile(counts, 0.5);
  const double q75 = lower_quantile(counts, 0.75);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = counts[static_cast<std::size_t>(i)];
    out[0][i] = c > 0 ? 1.0 : 0.0;
    out[1][i] = c > median ? 1.0 : 0.0;
    out[2][i] = c > q75 ? 1.0 : 0.0;
  }
  return out;
}

std::optional<double> bross_score(const Vector& c, const Vector& a, const Vector& y) {
  if (c.size() != a.size() || c.size() != y.size()) throw std::invalid_argument("bross_score: length mismatch");
  double n_a1 = 0, n_a0 = 0, c_a1 = 0, c_a0 = 0, n_c1 = 0, n_c0 = 0, y_c1 = 0, y_c0 = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const bool ci = c[i] > 0.5;
    if (a[i] > 0.5) {
      ++n_a1;
      c_a1 += ci;
    } else {
      ++n_a0;
      c_a0 += ci;
    }
    if (ci) {
      ++n_c1;
      y_c1 += y[i];
    } else {
      ++n_c0;
      y_c0 += y[i];
    }
  }
  if (n_a1 == 0 || n_a0 == 0) throw std::invalid_argument("bross_score: a treatment arm is empty");
  if (n_c1 == 0 || n_c0 == 0 || y_c0 == 0) return std::nullopt;
  const double pi1 = c_a1 / n_a1;
  const double pi0 = c_a0 / n_a0;
  const double r = (y_c1 / n_c1) / (y_c0 / n_c0);
  const double denom = pi0 * (r - 1.0) + 1.0;
  if (denom == 0.0) return std::nullopt;
  return (pi1 * (r - 1.0) + 1.0) / denom;
}

std::optional<double> ranking_statistic(const std::optional<double>& score, bool raw_ranking) {
  if (!score || !std::isfinite(*score)) return std::nullopt;
  if (raw_ranking) return *score;
  if (*score <= 0.0) return std::nullopt;
  return std::max(*score, 1.0 / *score);
}

HdpsResult hdps_pipeline(const ClaimMatrix& claims, const Vector& a, const Vector& y, const HdpsOptions& opts) {
  if (opts.K < 1) throw std::invalid_argument("K must be at least 1");
  if (static_cast<Index>(a.size()) != claims.n() || static_cast<Index>(y.size()) != claims.n())
    throw DataError("treatment/outcome length does not match the claim matrix");
  HdpsResult out;
  out.screened = prevalence_screen(claims, opts.J);

  std::vector<HdpsCovariate> expanded;
  for (Index c : out.screened) {
    auto vectors = recurrence_expand(claims.column(c));
    for (int k = 0; k < 3; ++k) {
      HdpsCovariate cov;
      cov.source_code = claims.code_ids[c];
      cov.kind = static_cast<RecurrenceKind>(k);
      cov.values = std::move(vectors[static_cast<std::size_t>(k)]);
      cov.bross_score = bross_score(cov.values, a, y);
      expanded.push_back(std::move(cov));
    }
  }
  out.candidates = expanded.size();

  std::vector<std::optional<double>> stat(expanded.size());
  for (std::size_t i = 0; i < expanded.size(); ++i) stat[i] = ranking_statistic(expanded[i].bross_score, opts.raw_ranking);
  std::vector<std::size_t> order(expanded.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (stat[x].has_value() != stat[y].has_value()) return stat[x].has_value();
    if (stat[x] && *stat[x] != *stat[y]) return *stat[x] > *stat[y];
    if (expanded[x].source_code != expanded[y].source_code) return expanded[x].source_code < expanded[y].source_code;
    return expanded[x].kind < expanded[y].kind;
  });
  order.resize(std::min<std::size_t>(opts.K, order.size()));

  out.design.resize(static_cast<Eigen::Index>(claims.n()), static_cast<Eigen::Index>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.design.col(static_cast<Eigen::Index>(j)) = expanded[order[j]].values;
    out.columns.push_back(std::move(expanded[order[j]]));
  }
  return out;
}

ClaimMatrix read_claims_csv(const std::string& path, const std::vector<std::string>& patient_ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open claims file '" + path + "'");
  std::unordered_map<std::string, Index> patient_row;
  for (Index i = 0; i < patient_ids.size(); ++i) patient_row.emplace(patient_ids[i], i);

  std::string line;
  if (!std::getline(in, line)) throw DataError("claims file is empty");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"patient_id", "code", "cluster", "count"};
  if (header != expected) throw DataError("claims header must be patient_id,code,cluster,count", 0);

  ClaimMatrix claims;
  std::unordered_map<std::string, Index> code_col;
  std::vector<Eigen::Triplet<int>> entries;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw DataError("expected 4 fields", row);
    const auto p = patient_row.find(f[0]);
    if (p == patient_row.end()) throw DataError("unknown patient '" + f[0] + "'", row, "patient_id");
    const int count = parse_number<int>(f[3], row, "count");
    if (count < 0) throw DataError("negative claim count", row, "count");
    auto [it, inserted] = code_col.emplace(f[1], claims.code_ids.size());
    if (inserted) {
      claims.code_ids.push_back(f[1]);
      claims.cluster_of.push_back(f[2]);
    } else if (claims.cluster_of[it->second] != f[2]) {
      throw DataError("code '" + f[1] + "' listed under two clusters", row, "cluster");
    }
    entries.emplace_back(static_cast<int>(p->second), static_cast<int>(it->second), count);
  }
  claims.counts.resize(static_cast<int>(patient_ids.size()), static_cast<int>(claims.code_ids.size()));
  claims.counts.setFromTriplets(entries.begin(), entries.end());
  claims.validate();
  return claims;
}

std::pair<std::vector<std::string>, Vector> read_patient_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() != 2) throw DataError("expected two columns (patient_id, value)", 0);
  std::vector<std::string> ids;
  std::vector<double> values;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw DataError("expected 2 fields", row);
    if (!seen.insert(f[0]).second) throw DataError("duplicate patient '" + f[0] + "'", row, header[0]);
    ids.push_back(f[0]);
    values.push_back(parse_number<double>(f[1], row, header[1]));
  }
  return {ids, Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

void write_claims_csv(const std::string& path, const ClaimMatrix& claims, const std::vector<std::string>& patient_ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "patient_id,code,cluster,count\n";
  for (int c = 0; c < claims.counts.outerSize(); ++c)
    for (CountMatrix::InnerIterator it(claims.counts, c); it; ++it)
      if (it.value() > 0)
        out << patient_ids[static_cast<Index>(it.row())] << ',' << claims.code_ids[static_cast<Index>(c)] << ','
            << claims.cluster_of[static_cast<Index>(c)] << ',' << it.value() << '\n';
}

nlohmann::json provenance_json(const HdpsResult& result) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : result.columns) {
    nlohmann::json entry{{"column", c.name()}, {"code", c.source_code}, {"kind", to_string(c.kind)}};
    entry["score"] = c.bross_score ? nlohmann::json(*c.bross_score) : nlohmann::json(nullptr);
    cols.push_back(entry);
  }
  return {{"columns", cols}, {"screened_codes", result.screened.size()}, {"candidates", result.candidates}};
}

void write_hdps_output(const std::string& path, const std::vector<std::string>& patient_ids,
                       const HdpsResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "patient_id";
  for (const auto& c : result.columns) out << ',' << c.name();
  out << '\n';
  for (Index i = 0; i < patient_ids.size(); ++i) {
    out << patient_ids[i];
    for (Eigen::Index j = 0; j < result.design.cols(); ++j)
      out << ',' << static_cast<int>(result.design(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
  std::ofstream side(path + ".json");
  if (!side) throw DataError("cannot write '" + path + ".json'");
  side << provenance_json(result).dump(2) << '\n';
}

}  // namespace ctmle
