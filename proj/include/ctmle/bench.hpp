#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctmle/engine.hpp"
#include "ctmle/methods.hpp"

namespace ctmle {

struct BenchConfig {
  std::vector<Index> p_grid{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};  // with n = fixed_n
  std::vector<Index> n_grid;                                          // with p = fixed_p
  Index fixed_n = 1000;
  Index fixed_p = 20;
  Index reps = 10;
  std::vector<Method> variants{Method::ctmle_greedy, Method::ctmle_logistic, Method::ctmle_partcorr};
  std::uint64_t seed = 1;
  CtmleOptions ctmle;  // strategy is overwritten per variant
};

/// Default sweep: p in {10, ..., 100} at n = 1000, and n in {1000, ..., 20000}
/// at p = 20 with every n multiplied by `scale`.
BenchConfig default_bench(double scale = 1.0);

struct BenchPoint {
  std::string method;
  Index n = 0;
  Index p = 0;
  double median_seconds = 0.0;
  Index ps_fits = 0;     // full-data sequence
  Index cv_ps_fits = 0;  // all training folds together
  Index reset_fits = 0;  // full-data fits repeated after initial-Q resets
  std::vector<double> seconds;
};

/// Mutually independent covariates, treatment and binary outcome.
Dataset bench_data(Index n, Index p, std::uint64_t seed);

/// Times one C-TMLE variant on one data set; fills ps_fits.
double time_variant(Method variant, const Dataset& ds, const CtmleOptions& opts, BenchPoint* counters = nullptr);

std::vector<BenchPoint> run_bench(const BenchConfig& config);

/// OLS slope of log(median time) on log(p) over the points of one method.
double loglog_slope(const std::vector<BenchPoint>& points, const std::string& method);

void write_bench_csv(std::ostream& out, const std::vector<BenchPoint>& points);

}  // namespace ctmle
