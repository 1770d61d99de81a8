#pragma once

#include <random>
#include <span>

#include "sgfd/vec.hpp"

namespace sgfd {

// Random search-direction laws. Both have independent components with zero
// mean and unit variance (identity covariance), so for any fixed vector w
// the identity w = E[(w'zeta) zeta] holds and the directional difference
// quotient reconstructs the gradient in expectation.
enum class DirectionLaw {
  kStandardNormal,    // components N(0,1); unbounded, fourth moment 3
  kUniformSymmetric,  // components U(-sqrt(3), sqrt(3)); fourth moment 9/5
};

struct DirectionDistribution {
  DirectionLaw law = DirectionLaw::kUniformSymmetric;
  int dimension = 0;
};

struct DirectionMoments {
  double fourth_moment;   // E[zeta_i^4]
  double component_bound; // r with |zeta_i| <= r a.s.; +inf when unbounded
  double d_zeta;          // min(r, sqrt(1 + fourth_moment/d - 1/d))
};

// Half-width of the unit-variance symmetric uniform law.
inline constexpr double kUniformHalfWidth = 1.7320508075688772;  // sqrt(3)

// Closed-form moment constants for the law; d_zeta is the constant entering
// the third-moment bound ||E[(zeta'zeta) zeta]|| <= d^{3/2} d_zeta.
DirectionMoments moment_constants(const DirectionDistribution& dist);

// Draw one direction vector. The caller owns the generator; repeated draws
// from an identically seeded generator are bit-identical.
void sample_into(const DirectionDistribution& dist, std::mt19937_64& rng,
                 std::span<double> out);
Vec sample(const DirectionDistribution& dist, std::mt19937_64& rng);

// || (1/n) sum_i (w'zeta_i) zeta_i  -  w ||_2 : Monte-Carlo error of the
// identity-covariance reconstruction of w. Decays like 1/sqrt(n).
double reconstruction_error(const DirectionDistribution& dist, const Vec& w,
                            long n, std::mt19937_64& rng);

// || (1/n) sum_i (zeta_i'zeta_i) zeta_i ||_2 : empirical third-moment vector
// norm. Bounded by d^{3/2} d_zeta up to Monte-Carlo noise (the exact value
// is 0 for both symmetric laws).
double third_moment_norm(const DirectionDistribution& dist, long n,
                         std::mt19937_64& rng);

}  // namespace sgfd
