#include "ctmle/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

namespace ctmle {

BenchConfig default_bench(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  BenchConfig c;
  for (Index n = 1000; n <= 20000; n += 1000)
    c.n_grid.push_back(std::max<Index>(50, static_cast<Index>(std::lround(static_cast<double>(n) * scale))));
  return c;
}

Dataset bench_data(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  const auto rows = static_cast<Eigen::Index>(n);
  Matrix w(rows, static_cast<Eigen::Index>(p));
  Vector a(rows), y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng);
    a[i] = coin(rng);
    y[i] = coin(rng);
  }
  std::vector<std::string> names;
  for (Index j = 1; j <= p; ++j) names.push_back("W" + std::to_string(j));
  return Dataset(std::move(w), std::move(a), std::move(y), std::move(names), OutcomeKind::binary);
}

double time_variant(Method variant, const Dataset& ds, const CtmleOptions& opts, BenchPoint* counters) {
  CtmleOptions local = opts;
  switch (variant) {
    case Method::ctmle_greedy: local.strategy = GreedySearch{}; break;
    case Method::ctmle_logistic: local.strategy = OrderingRule::logistic; break;
    case Method::ctmle_partcorr: local.strategy = OrderingRule::partial_correlation; break;
    default: throw std::invalid_argument("bench supports the three C-TMLE variants only");
  }
  const auto start = std::chrono::steady_clock::now();
  const EstimationInput input = prepare_input(ds);
  const CtmleResult r = run_ctmle_detailed(input, OutcomeModelSpec{}, local);
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  if (counters) {
    counters->ps_fits = r.full_stats.ps_fits;
    counters->cv_ps_fits = r.cv_stats.ps_fits;
    counters->reset_fits = r.full_stats.reset_fits;
  }
  return took.count();
}

std::vector<BenchPoint> run_bench(const BenchConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("need at least one repetition");
  std::vector<std::pair<Index, Index>> grid;
  for (Index p : config.p_grid) grid.emplace_back(config.fixed_n, p);
  for (Index n : config.n_grid) grid.emplace_back(n, config.fixed_p);

  std::vector<BenchPoint> out;
  for (auto [n, p] : grid) {
    for (Method m : config.variants) {
      BenchPoint point;
      point.method = method_name(m);
      point.n = n;
      point.p = p;
      for (Index r = 0; r < config.reps; ++r) {
        const Dataset ds = bench_data(n, p, config.seed + r);
        point.seconds.push_back(time_variant(m, ds, config.ctmle, &point));
      }
      auto sorted = point.seconds;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t mid = sorted.size() / 2;
      point.median_seconds = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
      out.push_back(std::move(point));
    }
  }
  return out;
}

double loglog_slope(const std::vector<BenchPoint>& points, const std::string& method) {
  std::vector<double> x, y;
  for (const auto& pt : points) {
    if (pt.method != method || pt.median_seconds <= 0.0) continue;
    x.push_back(std::log(static_cast<double>(pt.p)));
    y.push_back(std::log(pt.median_seconds));
  }
  if (x.size() < 2) throw std::invalid_argument("need two timed points for a slope");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("all points share one p");
  return sxy / sxx;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchPoint>& points) {
  out << "method,n,p,reps,median_seconds,ps_fits,reset_fits,cv_ps_fits\n" << std::setprecision(8);
  for (const auto& pt : points)
    out << pt.method << ',' << pt.n << ',' << pt.p << ',' << pt.seconds.size() << ',' << pt.median_seconds << ','
        << pt.ps_fits << ',' << pt.reset_fits << ',' << pt.cv_ps_fits << '\n';
}

}  // namespace ctmle
