#include <doctest.h>

#include <cmath>
#include <random>

#include "sgfd/problems.hpp"
#include "sgfd/rng.hpp"
#include "sgfd/runner.hpp"

using namespace sgfd;

namespace {

StochasticProblem test_quadratic(int d, double condition, double noise_sd,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_quadratic(spaced_eigenvalues(d, condition), noise_sd, rng);
}

RunConfig base_config(int d) {
  RunConfig c;
  c.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  c.schedule = StepsizeSchedule::robbins_monro(2.0, 60.0);
  c.directions = DirectionDistribution{DirectionLaw::kUniformSymmetric, d};
  c.iterations = 100;
  c.replications = 2;
  c.seed = 99;
  c.record_stride = 10;
  return c;
}

double mean_gap_over(const Trace& t, long k_lo, long k_hi) {
  double sum = 0.0;
  long n = 0;
  for (const auto& row : t.rows)
    if (row.k >= k_lo && row.k <= k_hi && row.mean_gap) {
      sum += *row.mean_gap;
      ++n;
    }
  REQUIRE(n > 0);
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("single iteration reproduces the hand-unrolled update") {
  const auto problem = test_quadratic(3, 4.0, 0.5, 11);
  RunConfig config = base_config(3);
  config.iterations = 1;
  config.replications = 1;
  config.record_stride = 1;
  config.seed = 555;
  config.x1 = Vec{1.0, -2.0, 0.25};

  const Trace trace = run_sgfd(problem, config);

  // Replay: iteration 1 of replication 0 owns stream (0, 1).
  auto rng = StreamSeeder(555).stream(0, 1);
  const double alpha = config.schedule.stepsize(1);
  const Vec s = stochastic_step(problem, config.variant, config.directions,
                                *config.x1, alpha, rng);
  Vec expect = *config.x1;
  axpy(1.0, s, expect);

  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].k == 1);
  CHECK(trace.rows[0].alpha == alpha);
  CHECK(trace.rows[0].mean_objective ==
        doctest::Approx(problem.full_objective(*config.x1)));
  CHECK(trace.rows[0].mean_step == s);
  CHECK(trace.final_x == expect);
  CHECK(trace.initial_objective ==
        doctest::Approx(problem.full_objective(*config.x1)));
}

TEST_CASE("identical configurations give bitwise-identical traces") {
  const auto problem = test_quadratic(4, 10.0, 1.0, 12);
  const RunConfig config = base_config(4);
  const Trace a = run_sgfd(problem, config);
  const Trace b = run_sgfd(problem, config);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mean_objective == b.rows[i].mean_objective);
    CHECK(a.rows[i].mean_grad_sq == b.rows[i].mean_grad_sq);
    CHECK(a.rows[i].mean_step == b.rows[i].mean_step);
    CHECK(a.rows[i].mean_step_sq == b.rows[i].mean_step_sq);
  }
  CHECK(a.final_x == b.final_x);
}

TEST_CASE("recording stride shapes the trace") {
  const auto problem = test_quadratic(2, 3.0, 0.2, 13);
  RunConfig config = base_config(2);
  config.iterations = 60;
  config.record_stride = 15;
  const Trace trace = run_sgfd(problem, config);
  REQUIRE(trace.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(trace.rows[i].k == static_cast<long>(15 * (i + 1)));
}

TEST_CASE("run configuration validation") {
  const auto problem = test_quadratic(2, 3.0, 0.2, 14);
  RunConfig config = base_config(2);

  SUBCASE("iterations must be positive") {
    config.iterations = 0;
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
  SUBCASE("replications must be positive") {
    config.replications = 0;
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
  SUBCASE("stride must divide the iteration count") {
    config.iterations = 100;
    config.record_stride = 7;
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
  SUBCASE("x1 dimension must match") {
    config.x1 = Vec{1.0};
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
  SUBCASE("direction dimension must match") {
    config.directions.dimension = 5;
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
  SUBCASE("infeasible schedules are rejected when constants are known") {
    config.schedule = StepsizeSchedule::fixed(0.5);  // above 1/(L*M_G)
    CHECK_THROWS_AS(run_sgfd(problem, config), std::invalid_argument);
  }
}

TEST_CASE("missing x1 starts at the origin") {
  const auto problem = test_quadratic(3, 2.0, 0.0, 15);
  RunConfig config = base_config(3);
  const Trace trace = run_sgfd(problem, config);
  CHECK(trace.x1 == Vec(3, 0.0));
}

TEST_CASE("unstable dynamics raise a divergence error") {
  // A bare quadratic with no declared constants: feasibility is downgraded
  // to warnings and nothing stops the oversized stepsize from exploding.
  StochasticProblem p;
  p.name = "bare-square";
  p.dimension = 1;
  p.full_objective = [](const Vec& x) { return x[0] * x[0]; };
  p.reference_gradient = [](const Vec& x) { return Vec{2.0 * x[0]}; };
  p.sample_loss = [](const Vec& x, const Sample&) { return x[0] * x[0]; };
  p.draw_sample = [](std::mt19937_64&) { return Sample{}; };

  RunConfig config;
  config.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  config.schedule = StepsizeSchedule::fixed(2.0);
  config.directions = DirectionDistribution{DirectionLaw::kUniformSymmetric, 1};
  config.iterations = 2000;
  config.replications = 2;
  config.seed = 4;
  config.record_stride = 1;
  config.x1 = Vec{10.0};

  try {
    run_sgfd(p, config);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration >= 1);
    CHECK(e.replication >= 0);
    CHECK(e.threshold == doctest::Approx(1e8));  // 1e6 * F(x1) = 1e6 * 100
    CHECK((!(e.objective <= e.threshold)));      // NaN or above threshold
  }
}

TEST_CASE("unknown constants surface as warnings, not errors") {
  const auto problem = make_rosenbrock_like(2);
  RunConfig config = base_config(2);
  config.schedule = StepsizeSchedule::robbins_monro(30.0, 100000.0);
  config.iterations = 50;
  config.record_stride = 10;
  const Trace trace = run_sgfd(problem, config);
  CHECK(!trace.warnings.empty());
  CHECK(trace.rows.back().mean_gap.has_value());  // inf F = 0 is declared
}

TEST_CASE("fixed stepsizes drive the gap down to a plateau, not to zero") {
  const auto problem = test_quadratic(4, 5.0, 1.0, 16);
  RunConfig config = base_config(4);
  config.schedule = StepsizeSchedule::fixed(0.02);
  config.iterations = 4000;
  config.replications = 8;
  config.record_stride = 50;
  Vec x1 = *problem.constants.minimizer;
  for (auto& v : x1) v += 3.0;
  config.x1 = x1;

  const Trace trace = run_sgfd(problem, config);
  const double gap1 = problem.full_objective(x1);
  const double early = mean_gap_over(trace, 1000, 2000);
  const double late = mean_gap_over(trace, 2000, 4000);
  CHECK(late < gap1 / 10.0);   // the transient decayed
  CHECK(late > 0.3 * early);   // but the floor stopped the decay
}

TEST_CASE("gradient baseline descends on a quadratic") {
  const auto problem = test_quadratic(4, 10.0, 0.5, 17);
  RunConfig config = base_config(4);
  config.variant.batch_size = 2;
  config.iterations = 500;
  config.replications = 4;
  config.record_stride = 50;
  Vec x1 = *problem.constants.minimizer;
  for (auto& v : x1) v += 2.0;
  config.x1 = x1;

  const Trace trace = run_reference_sgd(problem, config);
  CHECK(trace.optimizer == "reference-sgd");
  CHECK(*trace.rows.back().mean_gap < problem.full_objective(x1) / 5.0);
}

TEST_CASE("gradient baseline requires per-sample gradients") {
  auto problem = test_quadratic(2, 2.0, 0.1, 18);
  problem.sample_gradient = nullptr;
  const RunConfig config = base_config(2);
  CHECK_THROWS_AS(run_reference_sgd(problem, config), std::invalid_argument);
}
