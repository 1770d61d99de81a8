#include "sgfd/directions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgfd {

static void check_dimension(const DirectionDistribution& dist) {
  if (dist.dimension < 1)
    throw std::invalid_argument("direction distribution: dimension must be >= 1");
}

DirectionMoments moment_constants(const DirectionDistribution& dist) {
  check_dimension(dist);
  const double d = static_cast<double>(dist.dimension);
  DirectionMoments m{};
  switch (dist.law) {
    case DirectionLaw::kStandardNormal:
      m.fourth_moment = 3.0;
      m.component_bound = std::numeric_limits<double>::infinity();
      break;
    case DirectionLaw::kUniformSymmetric:
      // E[t^4] over U(-sqrt(3), sqrt(3)) with unit variance: 9/5.
      m.fourth_moment = 9.0 / 5.0;
      m.component_bound = kUniformHalfWidth;
      break;
  }
  m.d_zeta = std::min(m.component_bound,
                      std::sqrt(1.0 + m.fourth_moment / d - 1.0 / d));
  return m;
}

void sample_into(const DirectionDistribution& dist, std::mt19937_64& rng,
                 std::span<double> out) {
  check_dimension(dist);
  if (out.size() != static_cast<std::size_t>(dist.dimension))
    throw std::invalid_argument("sample_into: output span has wrong dimension");
  switch (dist.law) {
    case DirectionLaw::kStandardNormal: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& v : out) v = normal(rng);
      break;
    }
    case DirectionLaw::kUniformSymmetric: {
      std::uniform_real_distribution<double> uniform(-kUniformHalfWidth,
                                                     kUniformHalfWidth);
      for (auto& v : out) v = uniform(rng);
      break;
    }
  }
}

Vec sample(const DirectionDistribution& dist, std::mt19937_64& rng) {
  Vec out(static_cast<std::size_t>(dist.dimension));
  sample_into(dist, rng, out);
  return out;
}

double reconstruction_error(const DirectionDistribution& dist, const Vec& w,
                            long n, std::mt19937_64& rng) {
  check_dimension(dist);
  if (w.size() != static_cast<std::size_t>(dist.dimension))
    throw std::invalid_argument(
        "reconstruction_error: vector dimension does not match distribution");
  if (n < 1) throw std::invalid_argument("reconstruction_error: n must be >= 1");
  const std::size_t d = w.size();
  Vec zeta(d), acc(d, 0.0);
  for (long i = 0; i < n; ++i) {
    sample_into(dist, rng, zeta);
    const double proj = dot(w, zeta);
    for (std::size_t c = 0; c < d; ++c) acc[c] += proj * zeta[c];
  }
  double err = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double delta = acc[c] / static_cast<double>(n) - w[c];
    err += delta * delta;
  }
  return std::sqrt(err);
}

double third_moment_norm(const DirectionDistribution& dist, long n,
                         std::mt19937_64& rng) {
  check_dimension(dist);
  if (n < 1) throw std::invalid_argument("third_moment_norm: n must be >= 1");
  const std::size_t d = static_cast<std::size_t>(dist.dimension);
  Vec zeta(d), acc(d, 0.0);
  for (long i = 0; i < n; ++i) {
    sample_into(dist, rng, zeta);
    const double sq = norm_sq(zeta);
    for (std::size_t c = 0; c < d; ++c) acc[c] += sq * zeta[c];
  }
  for (auto& v : acc) v /= static_cast<double>(n);
  return norm(acc);
}

}  // namespace sgfd
