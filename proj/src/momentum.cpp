#include "sgfd/momentum.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgfd {

DecaySchedule DecaySchedule::changing(double p) {
  if (!(p > 0.0) || !std::isfinite(p))
    throw std::invalid_argument("decay schedule: p must be > 0");
  DecaySchedule d;
  d.kind = DecayKind::kChanging;
  d.p = p;
  return d;
}

DecaySchedule DecaySchedule::fixed(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("decay schedule: gamma must be in (0, 1)");
  DecaySchedule d;
  d.kind = DecayKind::kFixed;
  d.gamma = gamma;
  return d;
}

double DecaySchedule::factor(long k) const {
  if (k < 1) throw std::invalid_argument("decay factor: k must be >= 1");
  if (kind == DecayKind::kFixed) return gamma;
  return std::pow(static_cast<double>(k) / static_cast<double>(k + 1), p);
}

double changing_decay_product(long j, long k, double p) {
  if (j < 1 || k < j)
    throw std::invalid_argument("decay product: need 1 <= j <= k");
  return std::pow(static_cast<double>(j) / static_cast<double>(k + 1), p);
}

MomentumState::MomentumState(int dimension, DecaySchedule decay)
    : decay_(decay) {
  if (dimension < 1)
    throw std::invalid_argument("momentum state: dimension must be >= 1");
  weighted_sum_.assign(static_cast<std::size_t>(dimension), 0.0);
  direction_.assign(static_cast<std::size_t>(dimension), 0.0);
}

const Vec& MomentumState::update(const Vec& step, double alpha) {
  if (step.size() != weighted_sum_.size())
    throw std::invalid_argument("momentum state: step dimension mismatch");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("momentum state: alpha must be positive");
  ++k_;
  if (decay_.kind == DecayKind::kChanging) {
    const double w = std::pow(static_cast<double>(k_), decay_.p);
    for (std::size_t i = 0; i < step.size(); ++i)
      weighted_sum_[i] += w * (step[i] / alpha);
    total_weight_ += w;
    total_weight_sq_ += w * w;
  } else {
    const double g = decay_.gamma;
    for (std::size_t i = 0; i < step.size(); ++i)
      weighted_sum_[i] = g * weighted_sum_[i] + step[i] / alpha;
    total_weight_ = g * total_weight_ + 1.0;
    total_weight_sq_ = g * g * total_weight_sq_ + 1.0;
  }
  for (std::size_t i = 0; i < step.size(); ++i)
    direction_[i] = weighted_sum_[i] / total_weight_;
  return direction_;
}

Vec MomentumState::accumulator() const {
  Vec v = weighted_sum_;
  const double scale =
      decay_.kind == DecayKind::kChanging
          ? std::pow(static_cast<double>(k_ + 1), -decay_.p)
          : decay_.gamma;
  for (auto& e : v) e *= scale;
  return v;
}

double MomentumState::normalizer() const {
  const double scale =
      decay_.kind == DecayKind::kChanging
          ? std::pow(static_cast<double>(k_ + 1), -decay_.p)
          : decay_.gamma;
  return total_weight_ * scale;
}

double MomentumState::weight_ratio() const {
  if (k_ == 0) throw std::logic_error("weight_ratio: no updates yet");
  return total_weight_sq_ / (total_weight_ * total_weight_);
}

namespace {

struct MomentumRowAccumulator {
  double sum_objective = 0.0;
  double sum_grad_sq = 0.0;
  Vec sum_step;
  double sum_step_sq = 0.0;
  Vec sum_m;
  double sum_m_sq = 0.0;
  Vec sum_sa;  // s_k / alpha_k (frozen mode)
  double sum_sa_sq = 0.0;
};

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

Trace run_accelerated(const StochasticProblem& problem,
                      const RunConfig& config,
                      const MomentumOptions& options) {
  validate_run_config(problem, config);
  validate_variant(config.variant, problem);
  if (options.clip_radius && !(*options.clip_radius > 0.0))
    throw std::invalid_argument("momentum: clip radius must be positive");

  FeasibilityContext ctx;
  ctx.strong_convexity = problem.constants.strong_convexity;
  ctx.smoothness = problem.constants.smoothness;
  auto warnings =
      check_feasibility(config.schedule, ctx, OptimizerKind::kMomentum);

  Trace trace;
  trace.problem = problem.name;
  trace.optimizer = "momentum";
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
  const double nan = std::numeric_limits<double>::quiet_NaN();
  trace.initial_objective =
      have_objective ? problem.full_objective(trace.x1) : nan;
  if (!have_objective)
    trace.warnings.emplace_back(
        "mean objective unavailable: divergence guard and objective traces "
        "disabled");
  const double guard_threshold =
      1e6 * std::max(trace.initial_objective, 1.0);

  const long K = config.iterations;
  const long n_rows = K / config.record_stride;
  const auto d = static_cast<std::size_t>(problem.dimension);
  std::vector<MomentumRowAccumulator> acc(static_cast<std::size_t>(n_rows));
  for (auto& a : acc) {
    a.sum_step.assign(d, 0.0);
    a.sum_m.assign(d, 0.0);
    a.sum_sa.assign(d, 0.0);
  }
  trace.rows.resize(static_cast<std::size_t>(n_rows));

  const auto t0 = std::chrono::steady_clock::now();
  const StreamSeeder seeder(config.seed);

  // Frozen-trajectory diagnostic: generate the pilot trajectory once from
  // its reserved seed stream; replications then replay these iterates.
  std::vector<Vec> pilot;
  if (options.frozen_trajectory) {
    if (static_cast<double>(K) * static_cast<double>(problem.dimension) >
        2e8)
      throw std::invalid_argument(
          "frozen mode: trajectory too large to store (K*d > 2e8)");
    pilot.reserve(static_cast<std::size_t>(K));
    MomentumState state(problem.dimension, options.decay);
    Vec x = trace.x1;
    for (long k = 1; k <= K; ++k) {
      pilot.push_back(x);
      const double alpha = config.schedule.stepsize(k);
      auto rng = seeder.stream(StreamSeeder::kPilotReplication,
                               static_cast<std::uint64_t>(k));
      const Vec s = stochastic_step(problem, config.variant,
                                    config.directions, x, alpha, rng);
      const Vec& m = state.update(s, alpha);
      axpy(alpha, m, x);
      if (!all_finite(x))
        throw DivergenceError(k, -1, nan, guard_threshold);
    }
  }

  // Iterate-coupling checkpoints (normal mode only; diagnostic).
  std::vector<long> checkpoints;
  if (!options.frozen_trajectory && K >= 4)
    checkpoints = {K / 4, K / 2, 3 * K / 4};
  std::vector<Vec> coupling_mean(checkpoints.size(), Vec(d, 0.0));
  std::vector<double> coupling_sq(checkpoints.size(), 0.0);

  for (int r = 0; r < config.replications; ++r) {
    Vec x = trace.x1;
    MomentumState state(problem.dimension, options.decay);
    std::vector<Vec> snapshots(checkpoints.size());
    for (long k = 1; k <= K; ++k) {
      const double alpha = config.schedule.stepsize(k);
      const Vec& x_here = options.frozen_trajectory
                              ? pilot[static_cast<std::size_t>(k - 1)]
                              : x;
      const long row =
          (k % config.record_stride == 0) ? k / config.record_stride - 1 : -1;
      if (row >= 0) {
        auto& a = acc[static_cast<std::size_t>(row)];
        if (have_objective) {
          const double f = problem.full_objective(x_here);
          if (!(f <= guard_threshold))
            throw DivergenceError(k, r, f, guard_threshold);
          a.sum_objective += f;
        }
        if (have_gradient)
          a.sum_grad_sq += norm_sq(problem.reference_gradient(x_here));
        if (r == 0) {
          trace.rows[static_cast<std::size_t>(row)].k = k;
          trace.rows[static_cast<std::size_t>(row)].alpha = alpha;
          trace.rows[static_cast<std::size_t>(row)].elapsed_sec =
              elapsed_seconds(t0);
        }
      }
      auto rng = seeder.stream(static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(k));
      const Vec s = stochastic_step(problem, config.variant,
                                    config.directions, x_here, alpha, rng);
      const Vec& m = state.update(s, alpha);
      if (row >= 0) {
        auto& a = acc[static_cast<std::size_t>(row)];
        axpy(1.0, s, a.sum_step);
        a.sum_step_sq += norm_sq(s);
        axpy(1.0, m, a.sum_m);
        a.sum_m_sq += norm_sq(m);
        if (options.frozen_trajectory) {
          for (std::size_t i = 0; i < d; ++i) a.sum_sa[i] += s[i] / alpha;
          a.sum_sa_sq += norm_sq(s) / (alpha * alpha);
        }
      }
      if (!options.frozen_trajectory) {
        axpy(alpha, m, x);
        if (options.clip_radius) {
          Vec delta(d);
          for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - trace.x1[i];
          const double dist = norm(delta);
          if (dist > *options.clip_radius) {
            const double scale = *options.clip_radius / dist;
            for (std::size_t i = 0; i < d; ++i)
              x[i] = trace.x1[i] + scale * delta[i];
          }
        }
        if (!all_finite(x)) throw DivergenceError(k, r, nan, guard_threshold);
        for (std::size_t c = 0; c < checkpoints.size(); ++c)
          if (k == checkpoints[c]) snapshots[c] = x;
      }
    }
    if (r == 0) trace.final_x = options.frozen_trajectory ? pilot.back() : x;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      if (snapshots[c].empty()) continue;
      Vec delta(d);
      for (std::size_t i = 0; i < d; ++i) delta[i] = snapshots[c][i] - x[i];
      axpy(1.0, delta, coupling_mean[c]);
      coupling_sq[c] += norm_sq(delta);
    }
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
    // V[m_k] = E||m||^2 - ||E m||^2 across replications
    double mean_m_sq = 0.0;
    for (double v : a.sum_m) mean_m_sq += (v * inv_r) * (v * inv_r);
    row.var_direction = a.sum_m_sq * inv_r - mean_m_sq;
    if (options.frozen_trajectory) {
      double mean_sa_sq = 0.0;
      for (double v : a.sum_sa) mean_sa_sq += (v * inv_r) * (v * inv_r);
      row.var_step_scaled = a.sum_sa_sq * inv_r - mean_sa_sq;
    }
  }
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (coupling_sq[c] <= 0.0) continue;
    double mean_norm_sq = 0.0;
    for (double v : coupling_mean[c])
      mean_norm_sq += (v * inv_r) * (v * inv_r);
    trace.iterate_coupling.emplace_back(checkpoints[c],
                                        mean_norm_sq / (coupling_sq[c] * inv_r));
  }
  trace.wall_clock_sec = elapsed_seconds(t0);
  return trace;
}

}  // namespace sgfd
