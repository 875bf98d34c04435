#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ctmle/preorder.hpp"
#include "ctmle/simgen.hpp"
#include "support.hpp"

using namespace ctmle;

namespace {

Index rank_of(const CovariateOrdering& o, Index j) {
  return static_cast<Index>(std::find(o.permutation.begin(), o.permutation.end(), j) - o.permutation.begin());
}

QbarValues fitted_q(const Dataset& ds, std::vector<Index> cols) {
  return predict_outcome(fit_outcome_model(OutcomeModelSpec{std::move(cols), std::nullopt}, ds), ds);
}

// Correlation of residuals after regressing each of r and w on [1, a].
double residual_oracle(const Vector& r, const Vector& w, const Vector& a) {
  Matrix X(a.size(), 2);
  X << Vector::Ones(a.size()), a;
  const auto qr = X.colPivHouseholderQr();
  const Vector er = r - X * qr.solve(r);
  const Vector ew = w - X * qr.solve(w);
  return er.dot(ew) / std::sqrt(er.squaredNorm() * ew.squaredNorm());
}

}  // namespace

TEST_CASE("partial correlation equals the residual-regression oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ds = testing_support::random_binary(50, 1, seed);
    const Vector r = testing_support::random_vector(50, seed + 100, -1, 1) + 0.3 * ds.treatment();
    const Vector w = ds.covariates().col(0);
    const double rho = partial_correlation(r, w, ds.treatment());
    CHECK(std::abs(rho - residual_oracle(r, w, ds.treatment())) <= 1e-10);
    // affine rescaling of either input leaves it unchanged (up to sign for negative scale)
    CHECK(std::abs(partial_correlation(3.0 * r.array() + 2.0, w, ds.treatment()) - rho) <= 1e-10);
    CHECK(std::abs(partial_correlation(r, -0.5 * w.array() + 7.0, ds.treatment()) + rho) <= 1e-10);
  }
}

TEST_CASE("partial correlation reduces to correlation when a is uncorrelated") {
  Vector a(4), r(4), w(4);
  a << 1, 0, 0, 1;
  r << 1, 1, -1, -1;  // orthogonal to a - mean(a)
  w << 1, 2, -2, -1;
  const Vector rc = r.array() - r.mean(), wc = w.array() - w.mean();
  const double plain = rc.dot(wc) / std::sqrt(rc.squaredNorm() * wc.squaredNorm());
  CHECK(partial_correlation(r, w, a) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("partial correlation is undefined when the covariate is the treatment") {
  const auto ds = testing_support::random_binary(30, 1, 2);
  const Vector r = testing_support::random_vector(30, 3);
  CHECK_THROWS_AS(partial_correlation(r, ds.treatment(), ds.treatment()), std::domain_error);
  CHECK_FALSE(try_partial_correlation(r, ds.treatment(), ds.treatment()).has_value());
}

TEST_CASE("single covariate gives the identity ordering") {
  const auto ds = testing_support::random_binary(40, 1, 3);
  const QbarValues q = fitted_q(ds, {});
  CHECK(logistic_preorder(ds, q).permutation == std::vector<Index>{0});
  CHECK(partial_corr_preorder(ds, q).permutation == std::vector<Index>{0});
}

TEST_CASE("duplicate covariates tie and keep index order") {
  const auto base = testing_support::random_binary(80, 2, 4);
  Matrix w(80, 3);
  w.col(0) = base.covariates().col(1);
  w.col(1) = base.covariates().col(0);
  w.col(2) = base.covariates().col(0);
  const Dataset ds(w, base.treatment(), base.outcome(), {"x", "d1", "d2"});
  const QbarValues q = fitted_q(ds, {});
  for (const auto& o : {logistic_preorder(ds, q), partial_corr_preorder(ds, q)}) {
    const Index r1 = rank_of(o, 1), r2 = rank_of(o, 2);
    CHECK(r1 + 1 == r2);
    CHECK(o.scores[r1] == o.scores[r2]);
  }
}

TEST_CASE("constant covariate is ranked last and flagged by partial correlation") {
  const auto base = testing_support::random_binary(60, 2, 6);
  Matrix w(60, 3);
  w.col(0) = Vector::Constant(60, 2.0);
  w.rightCols(2) = base.covariates();
  const Dataset ds(w, base.treatment(), base.outcome(), {"c", "w1", "w2"});
  const CovariateOrdering o = partial_corr_preorder(ds, fitted_q(ds, {}));
  CHECK(o.permutation.back() == 0);
  CHECK(o.flagged == std::vector<Index>{0});
}

TEST_CASE("strong confounder ranks ahead of noise in the fourth simulation design") {
  const StudySpec spec = study_spec(Study::sim4, 500);
  int logistic_ok = 0, partial_ok = 0;
  const int seeds = 200;
  for (int s = 1; s <= seeds; ++s) {
    const EstimationInput in = prepare_input(generate(spec, static_cast<std::uint64_t>(s)).data);
    const QbarValues q = fitted_q(in.scaled, {0, 1});
    const CovariateOrdering lo = logistic_preorder(in.scaled, q);
    const CovariateOrdering pc = partial_corr_preorder(in.scaled, q);
    logistic_ok += rank_of(lo, 2) < rank_of(lo, 3) && rank_of(lo, 2) < rank_of(lo, 5);
    partial_ok += rank_of(pc, 2) < rank_of(pc, 3) && rank_of(pc, 2) < rank_of(pc, 5);
  }
  CHECK(logistic_ok >= 0.95 * seeds);
  CHECK(partial_ok >= 0.95 * seeds);
}

TEST_CASE("independent covariate ranks below a true confounder") {
  int ok = 0;
  const int seeds = 100;
  for (int s = 1; s <= seeds; ++s) {
    const auto ds = testing_support::random_binary(400, 3, static_cast<std::uint64_t>(s));
    // column 0 drives A and Y, column 2 is independent of both
    const CovariateOrdering o = partial_corr_preorder(ds, fitted_q(ds, {}));
    ok += rank_of(o, 0) < rank_of(o, 2);
  }
  CHECK(ok >= 0.95 * seeds);
}

TEST_CASE("user orderings") {
  CHECK(fixed_order({0, 1, 2}, 3).permutation == std::vector<Index>{0, 1, 2});
  CHECK(fixed_order({2, 1, 0}, 3).permutation == std::vector<Index>{2, 1, 0});
  CHECK_THROWS(fixed_order({0, 0, 2}, 3));
  const auto path = (std::filesystem::temp_directory_path() / "ctmle_test_order.txt").string();
  std::ofstream(path) << "3\n2\n1\n";
  CHECK(read_ordering_file(path, 3).permutation == std::vector<Index>{2, 1, 0});
  std::ofstream(path) << "1\n1\n3\n";
  CHECK_THROWS(read_ordering_file(path, 3));
}
