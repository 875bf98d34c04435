#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ctmle/replicate.hpp"
#include "ctmle/simgen.hpp"

using namespace ctmle;

TEST_CASE("true effects of the simulation designs") {
  CHECK(true_ate(Study::sim1) == 1.0);
  CHECK(true_ate(Study::sim2) == 1.0);
  CHECK(true_ate(Study::sim4) == 1.0);
  CHECK(study_spec(Study::sim3).true_ate == kSim3TrueAte);
  CHECK_FALSE(study_spec(Study::plasmode).true_ate.has_value());
}

TEST_CASE("third-design effect agrees with an independent Monte-Carlo integral") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u;
  const int draws = 1000000;
  double sum = 0, sq = 0;
  for (int i = 0; i < draws; ++i) {
    u(rng);  // W1 does not enter the outcome
    const double lin = 2 * u(rng) + 2 * u(rng) + u(rng);
    const double d = expit(-2 + lin) - expit(-3 + lin);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sq / draws - mean * mean) / draws);
  CHECK(std::abs(mean - kSim3TrueAte) <= 3 * std::hypot(se, kSim3TrueAteMcSe));
}

TEST_CASE("first-design covariate moments") {
  const Sample s = generate(study_spec(Study::sim1, 100000), 1);
  const Matrix& w = s.data.covariates();
  const double n = static_cast<double>(w.rows());
  const Vector c1 = w.col(0).array() - w.col(0).mean();
  const Vector c2 = w.col(1).array() - w.col(1).mean();
  const double var1 = c1.squaredNorm() / n;
  const double cov = c1.dot(c2) / n;
  CHECK(std::abs(w.col(0).mean() - 0.5) <= 3 * std::sqrt(2.0 / n));
  // var of a sample variance of a normal is 2 sigma^4 / n
  CHECK(std::abs(var1 - 2.0) <= 3 * std::sqrt(2 * 4.0 / n));
  // var of a sample covariance is (s11 s22 + s12^2) / n
  CHECK(std::abs(cov - 1.0) <= 3 * std::sqrt((2.0 * 1.0 + 1.0) / n));
}

TEST_CASE("generation is deterministic per seed") {
  for (Study st : {Study::sim1, Study::sim2, Study::sim3, Study::sim4}) {
    const StudySpec spec = study_spec(st, 200);
    const Sample a = generate(spec, 42), b = generate(spec, 42), c = generate(spec, 43);
    CHECK(a.data.covariates() == b.data.covariates());
    CHECK(a.data.outcome() == b.data.outcome());
    CHECK(a.data.outcome() != c.data.outcome());
  }
}

TEST_CASE("plasmode truth") {
  const Matrix w = Matrix::Random(50, 3);
  const Vector a = (Vector::Random(50).array() > 0).cast<double>();
  CHECK(plasmode_outcomes(w, a, {0, 0, 0}, 1).true_ate == doctest::Approx(expit(1.0) - expit(0.0)).epsilon(1e-15));
  CHECK(expit(1.0) - expit(0.0) == doctest::Approx(0.2311).epsilon(1e-4));

  const std::vector<double> beta{0.3, -0.7, 1.1};
  double sum = 0;
  for (int i = 0; i < 50; ++i) {
    const double eta = 0.3 * w(i, 0) - 0.7 * w(i, 1) + 1.1 * w(i, 2);
    sum += 1 / (1 + std::exp(-(eta + 1))) - 1 / (1 + std::exp(-eta));
  }
  CHECK(std::abs(plasmode_outcomes(w, a, beta, 1).true_ate - sum / 50) <= 1e-12);
}

TEST_CASE("plasmode samples carry their own truth and a fifteen-column design") {
  StudySpec spec = study_spec(Study::plasmode, 600);
  spec.claims.codes = 120;
  const Sample s = generate(spec, 3);
  CHECK(s.data.p() == 10 + spec.claims.K);
  CHECK(s.truth > 0.0);
  CHECK(s.truth < 1.0);
}

TEST_CASE("oracle estimator has zero error") {
  ReplicationConfig cfg;
  cfg.spec = study_spec(Study::sim1, 100);
  cfg.reps = 5;
  cfg.estimators.push_back(NamedEstimator{"oracle", [](const EstimationInput&, const OutcomeModelSpec&, std::uint64_t) {
                                            EstimateReport r;
                                            r.psi = 1.0;
                                            r.ci_lower = 0.9;
                                            r.ci_upper = 1.1;
                                            return r;
                                          }});
  cfg.misspecified_qbar = false;
  const ReplicationResult res = replicate(cfg);
  REQUIRE(res.metrics.size() == 1);
  CHECK(res.metrics[0].bias == 0.0);
  CHECK(res.metrics[0].se == 0.0);
  CHECK(res.metrics[0].mse == 0.0);
  CHECK(res.metrics[0].coverage == 1.0);
}

TEST_CASE("metric definitions satisfy mse = bias^2 + se^2 (N-1)/N") {
  ReplicationConfig cfg;
  cfg.spec = study_spec(Study::sim1, 300);
  cfg.reps = 12;
  cfg.estimators = {library_estimator(Method::tmle, {}), library_estimator(Method::iptw, {})};
  const ReplicationResult res = replicate(cfg);
  CHECK(res.metrics.size() == 4);
  for (const auto& m : res.metrics) {
    const double n = static_cast<double>(m.successes);
    CHECK(m.mse == doctest::Approx(m.bias * m.bias + m.se * m.se * (n - 1) / n).epsilon(1e-10));
  }
}

TEST_CASE("failures are recorded without stopping the run") {
  ReplicationConfig cfg;
  cfg.spec = study_spec(Study::sim1, 100);
  cfg.reps = 4;
  cfg.misspecified_qbar = false;
  cfg.estimators.push_back(NamedEstimator{"flaky", [](const EstimationInput&, const OutcomeModelSpec&, std::uint64_t seed) {
                                            if (seed % 2 == 0) throw NumericalError("boom");
                                            EstimateReport r;
                                            r.psi = 1.5;
                                            return r;
                                          }});
  const ReplicationResult res = replicate(cfg);
  CHECK(res.metrics[0].failures == 2);
  CHECK(res.metrics[0].successes == 2);
  CHECK(res.metrics[0].bias == doctest::Approx(0.5));
  std::ostringstream csv;
  write_estimates_csv(csv, "sim1", res.estimates);
  CHECK(csv.str().find("boom") != std::string::npos);
}

TEST_CASE("replication output does not depend on the worker count") {
  ReplicationConfig cfg;
  cfg.spec = study_spec(Study::sim1, 200);
  cfg.reps = 6;
  cfg.estimators = {library_estimator(Method::ctmle_logistic, {})};
  const ReplicationResult one = replicate(cfg);
  cfg.jobs = 3;
  const ReplicationResult three = replicate(cfg);
  REQUIRE(one.estimates.size() == three.estimates.size());
  for (std::size_t i = 0; i < one.estimates.size(); ++i) CHECK(one.estimates[i].report.psi == three.estimates[i].report.psi);
}
