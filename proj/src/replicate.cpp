#include "ctmle/replicate.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace ctmle {

NamedEstimator library_estimator(Method m, const MethodOptions& opts) {
  return {method_name(m), [m, opts](const EstimationInput& input, const OutcomeModelSpec& q, std::uint64_t seed) {
            MethodOptions local = opts;
            local.ctmle.seed = seed;
            return estimate(m, input, q, local);
          }};
}

ReplicationMetrics summarize(const std::vector<ReplicationEstimate>& estimates) {
  ReplicationMetrics m;
  if (!estimates.empty()) {
    m.qbar = estimates.front().qbar;
    m.method = estimates.front().method;
  }
  double sum = 0.0, sum_err = 0.0, sum_sq_err = 0.0, covered = 0.0, seconds = 0.0;
  std::vector<double> psi;
  for (const auto& e : estimates) {
    if (!e.ok) {
      ++m.failures;
      continue;
    }
    psi.push_back(e.report.psi);
    sum += e.report.psi;
    const double err = e.report.psi - e.truth;
    sum_err += err;
    sum_sq_err += err * err;
    if (e.report.ci_lower <= e.truth && e.truth <= e.report.ci_upper) covered += 1.0;
    if (e.report.diagnostics.contains("seconds")) seconds += e.report.diagnostics["seconds"].get<double>();
  }
  m.successes = psi.size();
  if (psi.empty()) {
    m.bias = m.se = m.mse = m.coverage = std::nan("");
    return m;
  }
  const double n = static_cast<double>(psi.size());
  const double mean = sum / n;
  m.bias = sum_err / n;
  double ss = 0.0;
  for (double v : psi) ss += (v - mean) * (v - mean);
  m.se = psi.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  m.mse = sum_sq_err / n;
  m.coverage = covered / n;
  m.mean_seconds = seconds / n;
  return m;
}

ReplicationResult replicate(const ReplicationConfig& config) {
  if (config.reps < 2) throw std::invalid_argument("need at least two replications");
  if (config.estimators.empty()) throw std::invalid_argument("no estimators requested");

  std::vector<std::pair<std::string, OutcomeModelSpec>> specs;
  if (config.correct_qbar && config.spec.qbar_correct) specs.emplace_back("correct", *config.spec.qbar_correct);
  if (config.misspecified_qbar && config.spec.qbar_misspecified)
    specs.emplace_back("misspecified", *config.spec.qbar_misspecified);
  if (specs.empty()) throw std::invalid_argument("no outcome-model specification selected for this study");

  const Index per_rep = specs.size() * config.estimators.size();
  std::vector<ReplicationEstimate> slots(config.reps * per_rep);

  auto run_rep = [&](Index r) {
    const std::uint64_t seed = replication_seed(config.seed, r);
    Index slot = r * per_rep;
    std::optional<Sample> sample;
    std::optional<EstimationInput> input;
    std::string setup_error;
    try {
      sample = generate(config.spec, seed);
      input = prepare_input(sample->data);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (const auto& [label, qspec] : specs) {
      for (const auto& est : config.estimators) {
        ReplicationEstimate& e = slots[slot++];
        e.qbar = label;
        e.method = est.name;
        e.rep = r;
        if (!input) {
          e.error = setup_error;
          continue;
        }
        e.truth = sample->truth;
        try {
          const auto start = std::chrono::steady_clock::now();
          e.report = est.run(*input, qspec, seed);
          const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
          e.report.diagnostics["seconds"] = took.count();
          e.ok = std::isfinite(e.report.psi);
          if (!e.ok) e.error = "non-finite estimate";
        } catch (const std::exception& ex) {
          e.error = ex.what();
        }
      }
    }
  };

  if (config.jobs <= 1) {
    for (Index r = 0; r < config.reps; ++r) run_rep(r);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    for (Index t = 0; t < std::min(config.jobs, config.reps); ++t)
      pool.emplace_back([&] {
        for (Index r = next++; r < config.reps; r = next++) run_rep(r);
      });
    for (auto& t : pool) t.join();
  }

  ReplicationResult result;
  result.estimates = std::move(slots);
  for (Index s = 0; s < specs.size(); ++s) {
    for (Index m = 0; m < config.estimators.size(); ++m) {
      std::vector<ReplicationEstimate> group;
      for (Index r = 0; r < config.reps; ++r)
        group.push_back(result.estimates[r * per_rep + s * config.estimators.size() + m]);
      result.metrics.push_back(summarize(group));
    }
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::string& study, const std::vector<ReplicationMetrics>& metrics) {
  out << "study,qbar,method,successes,failures,bias,se,mse,coverage,mean_seconds\n";
  out << std::setprecision(10);
  for (const auto& m : metrics)
    out << study << ',' << m.qbar << ',' << m.method << ',' << m.successes << ',' << m.failures << ',' << m.bias << ','
        << m.se << ',' << m.mse << ',' << m.coverage << ',' << m.mean_seconds << '\n';
}

void write_estimates_csv(std::ostream& out, const std::string& study, const std::vector<ReplicationEstimate>& estimates) {
  out << "study,qbar,method,rep,psi,se,ci_lower,ci_upper,truth,k_selected,strategy,status\n";
  out << std::setprecision(12);
  for (const auto& e : estimates) {
    out << study << ',' << e.qbar << ',' << e.method << ',' << e.rep << ',';
    if (e.ok) {
      out << e.report.psi << ',' << e.report.se << ',' << e.report.ci_lower << ',' << e.report.ci_upper << ',' << e.truth
          << ',' << (e.report.k_selected ? std::to_string(*e.report.k_selected) : "") << ','
          << e.report.strategy_selected.value_or("") << ",ok\n";
    } else {
      std::string msg = e.error;
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      out << ",,,," << e.truth << ",,," << "failed: " << msg << '\n';
    }
  }
}

}  // namespace ctmle
