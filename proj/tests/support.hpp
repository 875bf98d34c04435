#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctmle/data.hpp"
#include "ctmle/glm.hpp"

namespace testing_support {

using ctmle::Dataset;
using ctmle::Index;
using ctmle::Matrix;
using ctmle::Vector;

// Confounded binary data: A and Y both depend on the first two covariates.
inline Dataset random_binary(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Matrix w(n, p);
  Vector a(n), y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) w(i, j) = normal(rng);
    const double w0 = p > 0 ? w(i, 0) : 0.0;
    const double w1 = p > 1 ? w(i, 1) : 0.0;
    a[i] = unif(rng) < ctmle::expit(0.3 * w0 - 0.4 * w1) ? 1.0 : 0.0;
    y[i] = unif(rng) < ctmle::expit(-0.2 + a[i] + 0.6 * w0 + 0.5 * w1) ? 1.0 : 0.0;
  }
  // keep both arms and both outcome values present
  a[0] = 1; a[1] = 0; y[0] = 1; y[1] = 0;
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("W" + std::to_string(j + 1));
  return Dataset(std::move(w), std::move(a), std::move(y), std::move(names), ctmle::OutcomeKind::binary);
}

inline Vector random_vector(Index n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = unif(rng);
  return v;
}

}  // namespace testing_support
