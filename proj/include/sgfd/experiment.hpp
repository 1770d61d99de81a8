#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgfd/analysis.hpp"
#include "sgfd/directions.hpp"
#include "sgfd/momentum.hpp"
#include "sgfd/problems.hpp"
#include "sgfd/runner.hpp"
#include "sgfd/schedule.hpp"
#include "sgfd/step.hpp"

namespace sgfd {

inline constexpr const char* kLibraryVersion = "1.0.0";

// One experiment combination, as parsed from a spec-file section. All keys
// are documented in docs/config.md.
struct CombinationSpec {
  std::string name;  // section name; also the CSV basename

  // Problem recipe.
  std::string problem_kind;  // "quadratic" | "logistic" | "rosenbrock"
  int dimension = 0;
  double condition = 10.0;     // quadratic
  double noise_sd = 1.0;       // quadratic
  std::string dataset_path;    // logistic: file; empty = synthetic
  long synthetic_samples = 0;  // logistic: synthetic sample count
  double l2 = 0.01;            // logistic ridge weight

  // Optimizer.
  std::string optimizer;  // "sgfd" | "momentum" | "reference-sgd"
  StepVariant variant{};
  DirectionLaw law = DirectionLaw::kUniformSymmetric;
  StepsizeSchedule schedule{};
  long iterations = 0;
  long replications = 0;
  std::uint64_t seed = 0;
  long stride = 1;
  std::optional<Vec> x1;
  MomentumOptions momentum{};
};

struct ExperimentSpec {
  std::string output_dir = ".";
  std::vector<CombinationSpec> combinations;
};

// Flat key-value text: `key = value` lines, `#` comments, one `[name]`
// section per combination, prelude keys before the first section
// (currently: output_dir). Unknown or duplicate keys are errors naming the
// section, key, and line.
ExperimentSpec parse_experiment_text(const std::string& text,
                                     const std::string& origin);
ExperimentSpec parse_experiment_file(const std::string& path);

// Deterministically constructs the combination's problem (quadratic
// minimizers and synthetic datasets are drawn from a reserved stream of the
// combination's seed).
StochasticProblem build_problem(const CombinationSpec& combo);

// Fail-fast validation of every combination (problem construction, variant
// and run-config checks, stepsize feasibility, distinct seeds). Throws
// std::invalid_argument naming the offending section and field; nothing is
// written before this passes.
void validate_experiment(const ExperimentSpec& spec);

struct CombinationResult {
  std::string name;
  // Echo of the combination's identity, so the report is self-contained.
  std::string problem_kind;
  std::string optimizer;
  std::string variant_name;
  long iterations = 0;
  long replications = 0;
  long stride = 1;
  std::uint64_t seed = 0;
  bool diverged = false;
  long divergence_iteration = -1;
  int divergence_replication = -1;
  std::string divergence_detail;
  std::string csv_name;  // file name inside output_dir; empty when diverged
  std::optional<RateFit> rate;
  std::pair<long, long> rate_window{0, 0};
  std::optional<EnvelopeReport> envelope;  // plain Robbins-Monro runs only
  double m_hat = 0.0;                      // variance-model fit behind M_d
  double m_v_hat = 0.0;
  ProblemConstants constants;
  DirectionMoments moments{};
  std::vector<std::string> warnings;
  double wall_clock_sec = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;  // NaN when no full objective
  Trace trace;                   // in-memory copy for downstream consumers
};

struct ExperimentReport {
  std::string output_dir;
  std::vector<CombinationResult> results;
  double wall_clock_sec = 0.0;
};

// Runs every combination (concurrently up to worker_count()), then a single
// writer emits <name>.csv per combination plus report.json. A diverging
// combination is flagged in the report, gets no CSV, and does not stop the
// batch. Identical spec + seeds give byte-identical CSVs.
ExperimentReport run_experiment(const ExperimentSpec& spec);

// JSON rendering of the report (also written as report.json by
// run_experiment). Wall-clock fields are the only nondeterministic content.
std::string report_to_json(const ExperimentReport& report);

// SGFD_WORKERS environment variable, clamped to [1, 256]; 1 when unset or
// malformed.
int worker_count();

}  // namespace sgfd
