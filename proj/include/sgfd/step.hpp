#pragma once

#include <random>

#include "sgfd/directions.hpp"
#include "sgfd/problems.hpp"

namespace sgfd {

// The six gradient-free step estimators. Every variant forms differences
// f(x, xi) - f(x + alpha*zeta, xi) with the *same* xi at both points and
// multiplies by the direction zeta, so the expected step is
// -alpha*grad F(x) + O(alpha^2).
enum class StepKind {
  // one xi, one zeta
  kSingleSample,
  // batch of xi sharing one zeta: mean_i of the difference, times zeta
  kMinibatchSharedDirection,
  // outer batch of zeta_i, inner batch of xi_ij per direction
  kNestedBatch,
  // batch of independent (xi_i, zeta_i) pairs
  kPairedSampleDirection,
  // exact F instead of sample losses, one zeta
  kFullObjectiveSingle,
  // exact F, batch of zeta_i
  kFullObjectiveBatch,
};

struct StepVariant {
  StepKind kind = StepKind::kSingleSample;
  int batch_size = 1;   // n_k (outer batch)
  int inner_batch = 1;  // m_k (nested variant only)
};

const char* step_kind_name(StepKind kind);

// True when the variant evaluates the exact mean objective F directly.
bool uses_full_objective(StepKind kind);

// Validates a variant against a problem (batch sizes >= 1; full-objective
// variants need problem.full_objective). Throws std::invalid_argument.
void validate_variant(const StepVariant& variant,
                      const StochasticProblem& problem);

// Draw randomness and produce the step s(x, alpha). Draw order per variant
// (fixed; part of the reproducibility contract):
//   single-sample:      zeta, then xi
//   minibatch-shared:   zeta, then xi_1..xi_n
//   nested-batch:       per outer i: zeta_i, then xi_i1..xi_im
//   paired:             per i: zeta_i, then xi_i
//   full-single:        zeta
//   full-batch:         zeta_1..zeta_n
// Throws std::runtime_error on a non-finite evaluation.
Vec stochastic_step(const StochasticProblem& problem,
                    const StepVariant& variant,
                    const DirectionDistribution& dist, const Vec& x,
                    double alpha, std::mt19937_64& rng);

}  // namespace sgfd
