#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctmle/methods.hpp"
#include "ctmle/simgen.hpp"

namespace ctmle {

/// An estimator under test. `run` receives the prepared data and the
/// outcome-model spec of the current specification.
struct NamedEstimator {
  std::string name;
  std::function<EstimateReport(const EstimationInput&, const OutcomeModelSpec&, std::uint64_t seed)> run;
};

NamedEstimator library_estimator(Method m, const MethodOptions& opts);

struct ReplicationConfig {
  StudySpec spec;
  Index reps = 200;
  std::uint64_t seed = 1;
  std::vector<NamedEstimator> estimators;
  bool correct_qbar = true;        // each only when the study defines it
  bool misspecified_qbar = true;
  Index jobs = 1;
};

/// Seed of replication r: master seed plus replication index.
inline std::uint64_t replication_seed(std::uint64_t master, Index r) { return master + r; }

struct ReplicationEstimate {
  std::string qbar;  // "correct" or "misspecified"
  std::string method;
  Index rep = 0;
  double truth = 0.0;
  bool ok = false;
  EstimateReport report;
  std::string error;
};

struct ReplicationMetrics {
  std::string qbar;
  std::string method;
  Index successes = 0;
  Index failures = 0;
  double bias = 0.0;
  double se = 0.0;   // SD of the estimates (N - 1 denominator)
  double mse = 0.0;  // mean squared error against the per-replication truth
  double coverage = 0.0;
  double mean_seconds = 0.0;
};

struct ReplicationResult {
  std::vector<ReplicationMetrics> metrics;
  std::vector<ReplicationEstimate> estimates;
};

/// Per-replication failures are recorded, never fatal. Output order does not
/// depend on `jobs`.
ReplicationResult replicate(const ReplicationConfig& config);

ReplicationMetrics summarize(const std::vector<ReplicationEstimate>& estimates);

void write_metrics_csv(std::ostream& out, const std::string& study, const std::vector<ReplicationMetrics>& metrics);
void write_estimates_csv(std::ostream& out, const std::string& study, const std::vector<ReplicationEstimate>& estimates);

}  // namespace ctmle
