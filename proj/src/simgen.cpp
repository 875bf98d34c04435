#include "ctmle/simgen.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ctmle/glm.hpp"

namespace ctmle {

namespace {

using Rng = std::mt19937_64;

double draw_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
double draw_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
double draw_bernoulli(Rng& rng, double p) { return draw_uniform(rng) < p ? 1.0 : 0.0; }

std::vector<std::string> numbered(const std::string& stem, Index count) {
  std::vector<std::string> names;
  for (Index j = 1; j <= count; ++j) names.push_back(stem + std::to_string(j));
  return names;
}

std::vector<Index> iota_set(Index count) {
  std::vector<Index> v(count);
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

Dataset sim1(Index n, Rng& rng) {
  Matrix w(static_cast<Eigen::Index>(n), 2);
  Vector a(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z1 = draw_normal(rng), z2 = draw_normal(rng);
    // Cholesky factor of [[2, 1], [1, 1]]
    w(i, 0) = 0.5 + std::sqrt(2.0) * z1;
    w(i, 1) = 1.0 + (z1 + z2) / std::sqrt(2.0);
    a[i] = draw_bernoulli(rng, expit(0.5 + 0.25 * w(i, 0) + 0.75 * w(i, 1)));
    y[i] = 1.0 + a[i] + w(i, 0) + 2.0 * w(i, 1) + draw_normal(rng);
  }
  return Dataset(std::move(w), std::move(a), std::move(y), numbered("W", 2), OutcomeKind::bounded_continuous);
}

Dataset sim2(Index n, Rng& rng) {
  Matrix w(static_cast<Eigen::Index>(n), 8);
  Vector a(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double w1 = draw_bernoulli(rng, 0.5), w2 = draw_bernoulli(rng, 0.5), w3 = draw_bernoulli(rng, 0.5);
    const double w4 = draw_bernoulli(rng, 0.2 + 0.5 * w1);
    const double w5 = draw_bernoulli(rng, 0.05 + 0.3 * w1 + 0.1 * w2 + 0.05 * w3 + 0.4 * w4);
    const double w6 = draw_bernoulli(rng, 0.2 + 0.6 * w5);
    const double w7 = draw_bernoulli(rng, 0.5 + 0.2 * w3);
    const double w8 = draw_bernoulli(rng, 0.1 + 0.2 * w2 + 0.3 * w6 + 0.1 * w7);
    w.row(i) << w1, w2, w3, w4, w5, w6, w7, w8;
    a[i] = draw_bernoulli(
        rng, expit(-0.05 + 0.1 * w1 + 0.2 * w2 + 0.2 * w3 - 0.02 * w4 - 0.6 * w5 - 0.2 * w6 - 0.1 * w7));
    y[i] = 10.0 + a[i] + w1 + w2 + w4 + 2.0 * w6 + w7 + draw_normal(rng);
  }
  return Dataset(std::move(w), std::move(a), std::move(y), numbered("W", 8), OutcomeKind::bounded_continuous);
}

Dataset sim3(Index n, Rng& rng) {
  Matrix w(static_cast<Eigen::Index>(n), 4);
  Vector a(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (int j = 0; j < 4; ++j) w(i, j) = draw_uniform(rng);
    a[i] = draw_bernoulli(rng, expit(-2.0 + 5.0 * w(i, 0) + 2.0 * w(i, 1) + w(i, 2)));
    y[i] = draw_bernoulli(rng, expit(-3.0 + 2.0 * w(i, 1) + 2.0 * w(i, 2) + w(i, 3) + a[i]));
  }
  return Dataset(std::move(w), std::move(a), std::move(y), numbered("W", 4), OutcomeKind::binary);
}

Dataset sim4(Index n, Rng& rng) {
  Matrix w(static_cast<Eigen::Index>(n), 6);
  Vector a(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (int j = 0; j < 6; ++j) w(i, j) = draw_normal(rng);
    a[i] = draw_bernoulli(rng, expit(2.0 * w(i, 0) + 0.2 * w(i, 1) - 3.0 * w(i, 2)));
    y[i] = 0.5 * w(i, 0) - 8.0 * w(i, 1) + 9.0 * w(i, 2) - 2.0 * w(i, 4) + a[i] + draw_normal(rng);
  }
  return Dataset(std::move(w), std::move(a), std::move(y), numbered("W", 6), OutcomeKind::bounded_continuous);
}

// Baseline + hdPS design with plasmode outcomes.
Sample plasmode(const StudySpec& spec, std::uint64_t seed) {
  if (spec.claims.K < 5) throw std::invalid_argument("plasmode needs K >= 5 hdPS covariates");
  const SyntheticClaims sc = synthetic_claims(spec.n, spec.claims, seed);
  HdpsOptions hopts;
  hopts.J = spec.claims.J;
  hopts.K = spec.claims.K;
  const HdpsResult hd = hdps_pipeline(sc.claims, sc.treatment, sc.outcome, hopts);
  if (hd.design.cols() < 5) throw std::runtime_error("hdPS produced fewer than 5 covariates");

  const auto n = static_cast<Eigen::Index>(spec.n);
  const Eigen::Index base = sc.baseline.cols();
  Matrix w(n, base + hd.design.cols());
  w << sc.baseline, hd.design;
  auto names = sc.baseline_names;
  for (const auto& c : hd.columns) names.push_back(c.name());

  const PlasmodeOutcome out = plasmode_outcomes(w.leftCols(base + 5), sc.treatment, plasmode_beta(), seed ^ 0x9e3779b97f4a7c15ULL);
  return {Dataset(std::move(w), sc.treatment, out.y, std::move(names), OutcomeKind::binary), out.true_ate};
}

}  // namespace

std::optional<Study> parse_study(const std::string& name) {
  static const std::map<std::string, Study> table{{"sim1", Study::sim1},         {"sim2", Study::sim2},
                                                  {"sim3", Study::sim3},         {"sim4", Study::sim4},
                                                  {"plasmode", Study::plasmode}, {"synthetic-claims", Study::synthetic_claims}};
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::string to_string(Study s) {
  switch (s) {
    case Study::sim1: return "sim1";
    case Study::sim2: return "sim2";
    case Study::sim3: return "sim3";
    case Study::sim4: return "sim4";
    case Study::plasmode: return "plasmode";
    case Study::synthetic_claims: return "synthetic-claims";
  }
  return "?";
}

const std::vector<double>& plasmode_beta() {
  static const std::vector<double> beta{1.280, -1.727, 1.690,  0.503,  2.528,  0.549,  0.238, -1.048,
                                        1.294, 0.825,  -0.055, -0.784, -0.733, -0.215, -0.334};
  return beta;
}

double true_ate(Study s) {
  switch (s) {
    case Study::sim1:
    case Study::sim2:
    case Study::sim4: return 1.0;
    case Study::sim3: return kSim3TrueAte;
    case Study::plasmode:
    case Study::synthetic_claims: break;
  }
  throw std::invalid_argument("true ATE of " + to_string(s) + " depends on the sample");
}

StudySpec study_spec(Study s, std::optional<Index> n) {
  StudySpec spec;
  spec.study = s;
  switch (s) {
    case Study::sim1:
      spec.n = n.value_or(1000);
      spec.qbar_correct = OutcomeModelSpec{{0, 1}, std::nullopt};
      spec.qbar_misspecified = OutcomeModelSpec{{0}, std::nullopt};
      break;
    case Study::sim2:
      spec.n = n.value_or(1000);
      spec.qbar_correct = OutcomeModelSpec{{0, 1, 3, 5, 6}, std::nullopt};
      spec.qbar_misspecified = OutcomeModelSpec{{}, std::nullopt};
      break;
    case Study::sim3:
      spec.n = n.value_or(10000);
      spec.qbar_correct = OutcomeModelSpec{{1, 2, 3}, std::nullopt};
      spec.qbar_misspecified = OutcomeModelSpec{{}, std::nullopt};
      break;
    case Study::sim4:
      spec.n = n.value_or(1000);
      spec.qbar_misspecified = OutcomeModelSpec{{0, 1}, std::nullopt};
      break;
    case Study::plasmode:
    case Study::synthetic_claims:
      spec.n = n.value_or(5000);
      spec.qbar_correct = OutcomeModelSpec{iota_set(15), std::nullopt};
      spec.qbar_misspecified = OutcomeModelSpec{iota_set(10), std::nullopt};
      break;
  }
  if (s != Study::plasmode && s != Study::synthetic_claims) spec.true_ate = true_ate(s);
  return spec;
}

Sample generate(const StudySpec& spec, std::uint64_t seed) {
  if (spec.n < 2) throw std::invalid_argument("sample size must be at least 2");
  Rng rng(seed);
  switch (spec.study) {
    case Study::sim1: return {sim1(spec.n, rng), 1.0};
    case Study::sim2: return {sim2(spec.n, rng), 1.0};
    case Study::sim3: return {sim3(spec.n, rng), kSim3TrueAte};
    case Study::sim4: return {sim4(spec.n, rng), 1.0};
    case Study::plasmode:
    case Study::synthetic_claims: return plasmode(spec, seed);
  }
  throw std::invalid_argument("unknown study");
}

PlasmodeOutcome plasmode_outcomes(const Matrix& w_selected, const Vector& a, const std::vector<double>& beta,
                                  std::uint64_t seed) {
  if (static_cast<std::size_t>(w_selected.cols()) != beta.size())
    throw std::invalid_argument("plasmode: covariate count does not match beta");
  if (w_selected.rows() != a.size()) throw std::invalid_argument("plasmode: treatment length mismatch");
  const Eigen::Map<const Vector> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
  const Vector eta = w_selected * b;
  Rng rng(seed);
  PlasmodeOutcome out;
  out.y.resize(a.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.y[i] = draw_bernoulli(rng, expit(eta[i] + a[i]));
    sum += expit(eta[i] + 1.0) - expit(eta[i]);
  }
  out.true_ate = a.size() > 0 ? sum / static_cast<double>(a.size()) : 0.0;
  return out;
}

SyntheticClaims synthetic_claims(Index n, const ClaimsDesign& design, std::uint64_t seed) {
  if (design.codes < 1) throw std::invalid_argument("need at least one claim code");
  if (design.clusters < 1) throw std::invalid_argument("need at least one cluster");
  if (design.planted > design.codes) throw std::invalid_argument("more planted codes than codes");
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  SyntheticClaims out;

  out.baseline.resize(rows, 10);
  for (Eigen::Index i = 0; i < rows; ++i) {
    static constexpr double prevalence[7] = {0.2, 0.3, 0.4, 0.15, 0.25, 0.35, 0.5};
    for (int j = 0; j < 7; ++j) out.baseline(i, j) = draw_bernoulli(rng, prevalence[j]);
    for (int j = 7; j < 10; ++j) out.baseline(i, j) = draw_normal(rng);
  }
  out.baseline_names = numbered("B", 10);

  // Planted codes are spread evenly over the code range.
  for (Index j = 0; j < design.planted; ++j) out.planted_codes.push_back(j * design.codes / design.planted);
  Matrix latent(rows, static_cast<Eigen::Index>(design.planted));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < latent.cols(); ++j) latent(i, j) = draw_bernoulli(rng, design.planted_prevalence);

  std::vector<double> rate(design.codes);
  for (auto& r : rate) r = std::exp(std::log(0.01) + draw_uniform(rng) * (std::log(1.0) - std::log(0.01)));
  for (Index j = 0; j < design.planted; ++j) rate[out.planted_codes[j]] = 0.4;

  std::vector<double> frailty(n);
  std::gamma_distribution<double> gamma(2.0, 0.5);
  for (auto& u : frailty) u = gamma(rng);

  std::vector<Eigen::Triplet<int>> entries;
  Index planted_pos = 0;
  for (Index c = 0; c < design.codes; ++c) {
    const bool planted = planted_pos < design.planted && out.planted_codes[planted_pos] == c;
    for (Index i = 0; i < n; ++i) {
      double mean = rate[c] * frailty[i];
      if (planted) mean *= 1.0 + 3.0 * latent(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(planted_pos));
      const int count = std::poisson_distribution<int>(mean)(rng);
      if (count > 0) entries.emplace_back(static_cast<int>(i), static_cast<int>(c), count);
    }
    if (planted) ++planted_pos;
    char label[16];
    std::snprintf(label, sizeof label, "C%04zu", c + 1);
    out.claims.code_ids.emplace_back(label);
    out.claims.cluster_of.push_back("K" + std::to_string(c % design.clusters + 1));
  }
  out.claims.counts.resize(static_cast<int>(n), static_cast<int>(design.codes));
  out.claims.counts.setFromTriplets(entries.begin(), entries.end());

  out.treatment.resize(rows);
  out.outcome.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto b = out.baseline.row(i);
    const double z = latent.row(i).sum();
    const double planted_shift = design.planted > 0 ? design.exposure_effect * (z - design.planted * design.planted_prevalence) : 0.0;
    out.treatment[i] = draw_bernoulli(rng, expit(-0.2 + 0.4 * b[0] - 0.3 * b[1] + 0.3 * b[2] + 0.2 * b[7] - 0.2 * b[8] + planted_shift));
    out.outcome[i] = draw_bernoulli(rng, expit(-1.5 + 0.5 * out.treatment[i] + 0.3 * b[0] + 0.3 * b[3] + design.outcome_effect * z));
  }
  for (Index i = 0; i < n; ++i) out.patient_ids.push_back("P" + std::to_string(i + 1));
  return out;
}

}  // namespace ctmle
