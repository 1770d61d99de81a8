#include "sgfd/runner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace sgfd {

static std::string divergence_message(long iteration, int replication,
                                      double objective, double threshold) {
  std::ostringstream msg;
  msg << "divergence at iteration " << iteration << " (replication "
      << replication << "): objective " << objective
      << " exceeds guard threshold " << threshold;
  return msg.str();
}

DivergenceError::DivergenceError(long iteration_, int replication_,
                                 double objective_, double threshold_)
    : std::runtime_error(
          divergence_message(iteration_, replication_, objective_, threshold_)),
      iteration(iteration_),
      replication(replication_),
      objective(objective_),
      threshold(threshold_) {}

void validate_run_config(const StochasticProblem& problem,
                         const RunConfig& config) {
  if (config.iterations < 1)
    throw std::invalid_argument("run config: iteration count K must be >= 1");
  if (config.replications < 1)
    throw std::invalid_argument("run config: replications R must be >= 1");
  if (config.record_stride < 1 ||
      config.iterations % config.record_stride != 0)
    throw std::invalid_argument(
        "run config: record_stride must be >= 1 and divide the iteration "
        "count");
  if (config.x1 &&
      static_cast<int>(config.x1->size()) != problem.dimension)
    throw std::invalid_argument("run config: x1 dimension mismatch");
  if (config.directions.dimension != problem.dimension)
    throw std::invalid_argument(
        "run config: direction distribution dimension mismatch");
}

namespace {

// Per recorded index sums over replications; reduced in replication order.
struct RowAccumulator {
  double sum_objective = 0.0;
  double sum_grad_sq = 0.0;
  Vec sum_step;
  double sum_step_sq = 0.0;
};

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

// Shared skeleton of the plain runner and the gradient baseline; `make_step`
// draws this iteration's randomness internally and returns the increment
// applied to x.
template <typename StepFn>
static Trace run_plain_loop(const StochasticProblem& problem,
                            const RunConfig& config,
                            const char* optimizer_name, StepFn make_step,
                            std::vector<std::string> warnings) {
  validate_run_config(problem, config);

  Trace trace;
  trace.problem = problem.name;
  trace.optimizer = optimizer_name;
  trace.iterations = config.iterations;
  trace.replications = config.replications;
  trace.record_stride = config.record_stride;
  trace.seed = config.seed;
  trace.constants = problem.constants;
  trace.warnings = std::move(warnings);
  trace.x1 =
      config.x1.value_or(Vec(static_cast<std::size_t>(problem.dimension), 0.0));

  const bool have_objective = static_cast<bool>(problem.full_objective);
  const bool have_gradient = static_cast<bool>(problem.reference_gradient);
  trace.initial_objective = have_objective
                                ? problem.full_objective(trace.x1)
                                : std::numeric_limits<double>::quiet_NaN();
  if (!have_objective)
    trace.warnings.emplace_back(
        "mean objective unavailable: divergence guard and objective traces "
        "disabled");
  if (!have_gradient)
    trace.warnings.emplace_back(
        "reference gradient unavailable: gradient-norm traces disabled");
  const double guard_threshold =
      1e6 * std::max(trace.initial_objective, 1.0);

  const long n_rows = config.iterations / config.record_stride;
  std::vector<RowAccumulator> acc(static_cast<std::size_t>(n_rows));
  for (auto& a : acc)
    a.sum_step.assign(static_cast<std::size_t>(problem.dimension), 0.0);
  trace.rows.resize(static_cast<std::size_t>(n_rows));

  const auto t0 = std::chrono::steady_clock::now();
  const StreamSeeder seeder(config.seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int r = 0; r < config.replications; ++r) {
    Vec x = trace.x1;
    for (long k = 1; k <= config.iterations; ++k) {
      const double alpha = config.schedule.stepsize(k);
      const long row =
          (k % config.record_stride == 0) ? k / config.record_stride - 1 : -1;
      if (row >= 0) {
        auto& a = acc[static_cast<std::size_t>(row)];
        if (have_objective) {
          const double f = problem.full_objective(x);
          if (!(f <= guard_threshold))
            throw DivergenceError(k, r, f, guard_threshold);
          a.sum_objective += f;
        }
        if (have_gradient)
          a.sum_grad_sq += norm_sq(problem.reference_gradient(x));
        if (r == 0) {
          trace.rows[static_cast<std::size_t>(row)].k = k;
          trace.rows[static_cast<std::size_t>(row)].alpha = alpha;
          trace.rows[static_cast<std::size_t>(row)].elapsed_sec =
              elapsed_seconds(t0);
        }
      }
      auto rng = seeder.stream(static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(k));
      const Vec s = make_step(x, alpha, rng);
      if (row >= 0) {
        auto& a = acc[static_cast<std::size_t>(row)];
        axpy(1.0, s, a.sum_step);
        a.sum_step_sq += norm_sq(s);
      }
      axpy(1.0, s, x);
      if (!all_finite(x)) throw DivergenceError(k, r, nan, guard_threshold);
    }
    if (r == 0) trace.final_x = x;
  }

  const double inv_r = 1.0 / static_cast<double>(config.replications);
  for (long i = 0; i < n_rows; ++i) {
    auto& row = trace.rows[static_cast<std::size_t>(i)];
    const auto& a = acc[static_cast<std::size_t>(i)];
    row.mean_objective = have_objective ? a.sum_objective * inv_r : nan;
    if (have_objective && problem.constants.optimal_value)
      row.mean_gap = row.mean_objective - *problem.constants.optimal_value;
    row.mean_grad_sq = have_gradient ? a.sum_grad_sq * inv_r : nan;
    row.mean_step = a.sum_step;
    for (auto& v : row.mean_step) v *= inv_r;
    row.mean_step_sq = a.sum_step_sq * inv_r;
  }
  trace.wall_clock_sec = elapsed_seconds(t0);
  return trace;
}

Trace run_sgfd(const StochasticProblem& problem, const RunConfig& config) {
  FeasibilityContext ctx;
  ctx.strong_convexity = problem.constants.strong_convexity;
  ctx.smoothness = problem.constants.smoothness;
  auto warnings =
      check_feasibility(config.schedule, ctx, OptimizerKind::kPlain);
  validate_variant(config.variant, problem);
  return run_plain_loop(
      problem, config, "sgfd",
      [&](const Vec& x, double alpha, std::mt19937_64& rng) {
        return stochastic_step(problem, config.variant, config.directions, x,
                               alpha, rng);
      },
      std::move(warnings));
}

Trace run_reference_sgd(const StochasticProblem& problem,
                        const RunConfig& config) {
  if (!problem.sample_gradient)
    throw std::invalid_argument(
        "reference SGD requires the problem to expose per-sample gradients");
  FeasibilityContext ctx;
  ctx.strong_convexity = problem.constants.strong_convexity;
  ctx.smoothness = problem.constants.smoothness;
  auto warnings =
      check_feasibility(config.schedule, ctx, OptimizerKind::kPlain);
  const int batch = config.variant.batch_size;
  if (batch < 1)
    throw std::invalid_argument("reference SGD: batch_size must be >= 1");
  return run_plain_loop(
      problem, config, "reference-sgd",
      [&](const Vec& x, double alpha, std::mt19937_64& rng) {
        Vec g(x.size(), 0.0);
        for (int i = 0; i < batch; ++i) {
          const Sample xi = problem.draw_sample(rng);
          axpy(1.0, problem.sample_gradient(x, xi), g);
        }
        Vec s(x.size());
        const double scale = -alpha / static_cast<double>(batch);
        for (std::size_t j = 0; j < x.size(); ++j) s[j] = scale * g[j];
        return s;
      },
      std::move(warnings));
}

}  // namespace sgfd
