#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sgfd/problems.hpp"
#include "sgfd/rng.hpp"
#include "sgfd/schedule.hpp"
#include "sgfd/step.hpp"

namespace sgfd {

struct RunConfig {
  StepVariant variant;
  StepsizeSchedule schedule;
  DirectionDistribution directions;
  long iterations = 0;      // K
  int replications = 1;     // R
  std::uint64_t seed = 0;
  long record_stride = 1;   // must divide K
  std::optional<Vec> x1;    // initial iterate; zero vector when absent
};

// One recorded iterate index, aggregated over replications. Replications are
// reduced in index order, so identical configs and seeds reproduce the rows
// bit-for-bit.
struct TraceRow {
  long k = 0;
  double alpha = 0.0;
  double mean_objective = 0.0;            // E_r[F(x_k)]
  std::optional<double> mean_gap;         // E_r[F(x_k)] - F* when F* known
  double mean_grad_sq = 0.0;              // E_r[||grad F(x_k)||^2]
  Vec mean_step;                          // E_r[s_k]
  double mean_step_sq = 0.0;              // E_r[||s_k||^2]
  std::optional<double> var_direction;    // momentum: V[m_k] across reps
  std::optional<double> var_step_scaled;  // frozen mode: V[s_k/alpha_k]
  double elapsed_sec = 0.0;               // wall clock at recording time
};

struct Trace {
  std::string problem;
  std::string optimizer;  // "sgfd" | "momentum" | "reference-sgd"
  long iterations = 0;
  int replications = 0;
  long record_stride = 1;
  std::uint64_t seed = 0;
  ProblemConstants constants;
  std::vector<std::string> warnings;
  std::vector<TraceRow> rows;
  Vec x1;
  double initial_objective = 0.0;  // F(x1); NaN when F unavailable
  Vec final_x;                     // last iterate of replication 0
  double wall_clock_sec = 0.0;
  // Momentum diagnostic: ||E[x_j - x_final]||^2 / E[||x_j - x_final||^2]
  // at a few checkpoints j (recorded, never asserted).
  std::vector<std::pair<long, double>> iterate_coupling;
};

// Raised when an iterate's objective exceeds the divergence threshold
// (1e6 * max(F(x1), 1), checked at recorded iterations) or an iterate stops
// being finite. The experiment driver flags the combination and continues.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long iteration, int replication, double objective,
                  double threshold);
  long iteration;
  int replication;
  double objective;
  double threshold;
};

// Plain gradient-free descent: x_{k+1} = x_k + s_k with s_k from the
// configured step variant. Feasibility of the schedule is checked against
// the problem's constants (unknown constants downgrade checks to warnings).
Trace run_sgfd(const StochasticProblem& problem, const RunConfig& config);

// Gradient baseline for comparison curves: x_{k+1} = x_k - alpha_k * g_k,
// g_k a minibatch mean of per-sample gradients (batch size taken from
// config.variant.batch_size). Requires problem.sample_gradient.
Trace run_reference_sgd(const StochasticProblem& problem,
                        const RunConfig& config);

// Shared validation helper (also used by the momentum runner).
void validate_run_config(const StochasticProblem& problem,
                         const RunConfig& config);

}  // namespace sgfd
