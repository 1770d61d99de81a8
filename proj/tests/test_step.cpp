#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sgfd/step.hpp"

using namespace sgfd;

namespace {

// Noise-free linear objective: every step variant must produce
// s = -alpha * mean_i (c'zeta_i) zeta_i exactly (the difference quotient is
// exact for linear functions and independent of xi). draw_sample consumes
// exactly one engine call so draw order can be replayed by hand.
StochasticProblem make_linear(const Vec& c) {
  StochasticProblem p;
  p.name = "linear";
  p.dimension = static_cast<int>(c.size());
  p.full_objective = [c](const Vec& x) { return dot(c, x); };
  p.reference_gradient = [c](const Vec&) { return c; };
  p.sample_loss = [c](const Vec& x, const Sample&) { return dot(c, x); };
  p.draw_sample = [](std::mt19937_64& r) {
    Sample s;
    s.index = static_cast<long>(r() & 0xffff);
    return s;
  };
  return p;
}

Vec hand_step(const Vec& c, const Vec& zeta, double alpha) {
  Vec s(zeta.size());
  const double coeff = -alpha * dot(c, zeta);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = coeff * zeta[i];
  return s;
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("all six variants reduce to the exact linear step at batch 1") {
  const Vec c{1.0, -2.0, 0.5};
  const auto problem = make_linear(c);
  const DirectionDistribution dist{DirectionLaw::kUniformSymmetric, 3};
  const double alpha = 0.01;

  for (StepKind kind :
       {StepKind::kSingleSample, StepKind::kMinibatchSharedDirection,
        StepKind::kNestedBatch, StepKind::kPairedSampleDirection,
        StepKind::kFullObjectiveSingle, StepKind::kFullObjectiveBatch}) {
    CAPTURE(step_kind_name(kind));
    std::mt19937_64 rng(2024);
    const Vec s = stochastic_step(problem, StepVariant{kind, 1, 1}, dist,
                                  Vec{1.0, 2.0, 3.0}, alpha, rng);
    // Every variant draws its (single) direction first from the same seed.
    std::mt19937_64 replay(2024);
    const Vec zeta = sample(dist, replay);
    CHECK(max_abs_diff(s, hand_step(c, zeta, alpha)) < 1e-12);
  }
}

TEST_CASE("batched variants follow the documented draw order") {
  const Vec c{2.0, 1.0};
  const auto problem = make_linear(c);
  const DirectionDistribution dist{DirectionLaw::kUniformSymmetric, 2};
  const Vec x{0.5, -0.5};
  const double alpha = 0.05;

  SUBCASE("minibatch shares one direction across the sample batch") {
    std::mt19937_64 rng(7);
    const Vec s = stochastic_step(
        problem, StepVariant{StepKind::kMinibatchSharedDirection, 3, 1}, dist,
        x, alpha, rng);
    std::mt19937_64 replay(7);
    const Vec zeta = sample(dist, replay);
    CHECK(max_abs_diff(s, hand_step(c, zeta, alpha)) < 1e-12);
  }

  SUBCASE("paired variant alternates direction and sample draws") {
    std::mt19937_64 rng(8);
    const Vec s = stochastic_step(
        problem, StepVariant{StepKind::kPairedSampleDirection, 2, 1}, dist, x,
        alpha, rng);
    std::mt19937_64 replay(8);
    const Vec z1 = sample(dist, replay);
    replay();  // the xi paired with z1
    const Vec z2 = sample(dist, replay);
    Vec expect = hand_step(c, z1, alpha);
    axpy(1.0, hand_step(c, z2, alpha), expect);
    for (auto& v : expect) v *= 0.5;
    CHECK(max_abs_diff(s, expect) < 1e-12);
  }

  SUBCASE("nested variant draws each direction before its inner samples") {
    std::mt19937_64 rng(9);
    const Vec s =
        stochastic_step(problem, StepVariant{StepKind::kNestedBatch, 2, 2},
                        dist, x, alpha, rng);
    std::mt19937_64 replay(9);
    const Vec z1 = sample(dist, replay);
    replay();
    replay();  // two inner samples for z1
    const Vec z2 = sample(dist, replay);
    Vec expect = hand_step(c, z1, alpha);
    axpy(1.0, hand_step(c, z2, alpha), expect);
    for (auto& v : expect) v *= 0.5;
    CHECK(max_abs_diff(s, expect) < 1e-12);
  }

  SUBCASE("exact-objective batch averages per-direction differences") {
    std::mt19937_64 rng(10);
    const Vec s = stochastic_step(
        problem, StepVariant{StepKind::kFullObjectiveBatch, 2, 1}, dist, x,
        alpha, rng);
    std::mt19937_64 replay(10);
    const Vec z1 = sample(dist, replay);
    const Vec z2 = sample(dist, replay);
    Vec expect = hand_step(c, z1, alpha);
    axpy(1.0, hand_step(c, z2, alpha), expect);
    for (auto& v : expect) v *= 0.5;
    CHECK(max_abs_diff(s, expect) < 1e-12);
  }
}

TEST_CASE("exact-objective difference quotient on a pure quadratic") {
  StochasticProblem p;
  p.name = "half-norm";
  p.dimension = 2;
  p.full_objective = [](const Vec& x) { return 0.5 * norm_sq(x); };
  p.reference_gradient = [](const Vec& x) { return x; };
  p.sample_loss = [](const Vec& x, const Sample&) { return 0.5 * norm_sq(x); };
  p.draw_sample = [](std::mt19937_64&) { return Sample{}; };

  const DirectionDistribution dist{DirectionLaw::kStandardNormal, 2};
  const Vec x{1.5, -0.5};
  const double alpha = 0.125;

  std::mt19937_64 rng(11);
  const Vec s = stochastic_step(
      p, StepVariant{StepKind::kFullObjectiveSingle, 1, 1}, dist, x, alpha,
      rng);
  std::mt19937_64 replay(11);
  const Vec zeta = sample(dist, replay);
  // F(x) - F(x + a z) = -a x'z - a^2/2 ||z||^2, times z.
  const double coeff = -alpha * dot(x, zeta) - 0.5 * alpha * alpha * norm_sq(zeta);
  Vec expect(2);
  for (int i = 0; i < 2; ++i) expect[i] = coeff * zeta[i];
  CHECK(max_abs_diff(s, expect) < 1e-12);
}

TEST_CASE("variant validation") {
  const auto problem = make_linear(Vec{1.0, 1.0});
  CHECK_THROWS_AS(
      validate_variant(StepVariant{StepKind::kSingleSample, 0, 1}, problem),
      std::invalid_argument);
  CHECK_THROWS_AS(
      validate_variant(StepVariant{StepKind::kNestedBatch, 1, 0}, problem),
      std::invalid_argument);

  StochasticProblem no_mean = problem;
  no_mean.full_objective = nullptr;
  CHECK_THROWS_AS(
      validate_variant(StepVariant{StepKind::kFullObjectiveSingle, 1, 1},
                       no_mean),
      std::invalid_argument);
  CHECK_NOTHROW(
      validate_variant(StepVariant{StepKind::kSingleSample, 1, 1}, no_mean));
}

TEST_CASE("non-finite evaluations are rejected") {
  StochasticProblem p = make_linear(Vec{1.0});
  p.sample_loss = [](const Vec&, const Sample&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  const DirectionDistribution dist{DirectionLaw::kUniformSymmetric, 1};
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(stochastic_step(p, StepVariant{StepKind::kSingleSample, 1, 1},
                                  dist, Vec{0.0}, 0.1, rng),
                  std::runtime_error);
}

TEST_CASE("variant names and objective classification") {
  CHECK(std::string(step_kind_name(StepKind::kSingleSample)) ==
        "single-sample");
  CHECK(std::string(step_kind_name(StepKind::kNestedBatch)) == "nested-batch");
  CHECK(uses_full_objective(StepKind::kFullObjectiveSingle));
  CHECK(uses_full_objective(StepKind::kFullObjectiveBatch));
  CHECK_FALSE(uses_full_objective(StepKind::kSingleSample));
  CHECK_FALSE(uses_full_objective(StepKind::kPairedSampleDirection));
}
