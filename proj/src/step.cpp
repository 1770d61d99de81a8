#include "sgfd/step.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgfd {

const char* step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kSingleSample: return "single-sample";
    case StepKind::kMinibatchSharedDirection: return "minibatch-shared-direction";
    case StepKind::kNestedBatch: return "nested-batch";
    case StepKind::kPairedSampleDirection: return "paired-sample-direction";
    case StepKind::kFullObjectiveSingle: return "full-objective-single";
    case StepKind::kFullObjectiveBatch: return "full-objective-batch";
  }
  return "unknown";
}

bool uses_full_objective(StepKind kind) {
  return kind == StepKind::kFullObjectiveSingle ||
         kind == StepKind::kFullObjectiveBatch;
}

void validate_variant(const StepVariant& variant,
                      const StochasticProblem& problem) {
  if (variant.batch_size < 1)
    throw std::invalid_argument("step variant: batch_size must be >= 1");
  if (variant.kind == StepKind::kNestedBatch && variant.inner_batch < 1)
    throw std::invalid_argument("step variant: inner_batch must be >= 1");
  if (uses_full_objective(variant.kind) && !problem.full_objective)
    throw std::invalid_argument(
        std::string("step variant ") + step_kind_name(variant.kind) +
        " requires the problem to expose the exact mean objective");
  if (!uses_full_objective(variant.kind) &&
      (!problem.sample_loss || !problem.draw_sample))
    throw std::invalid_argument(
        "step variant: problem lacks sample_loss/draw_sample");
}

static double checked(double v, const StochasticProblem& problem,
                      const char* where) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite evaluation of " << where << " on problem '"
        << problem.name << "'";
    throw std::runtime_error(msg.str());
  }
  return v;
}

Vec stochastic_step(const StochasticProblem& problem,
                    const StepVariant& variant,
                    const DirectionDistribution& dist, const Vec& x,
                    double alpha, std::mt19937_64& rng) {
  validate_variant(variant, problem);
  if (static_cast<int>(x.size()) != problem.dimension)
    throw std::invalid_argument("stochastic_step: x dimension mismatch");
  if (dist.dimension != problem.dimension)
    throw std::invalid_argument(
        "stochastic_step: direction dimension mismatch");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("stochastic_step: alpha must be positive");

  const std::size_t d = x.size();
  Vec zeta(d), shifted(d), step(d, 0.0);
  const double n = static_cast<double>(variant.batch_size);

  switch (variant.kind) {
    case StepKind::kSingleSample: {
      sample_into(dist, rng, zeta);
      add_scaled(x, alpha, zeta, shifted);
      const Sample xi = problem.draw_sample(rng);
      const double diff =
          checked(problem.sample_loss(x, xi), problem, "sample loss") -
          checked(problem.sample_loss(shifted, xi), problem, "sample loss");
      axpy(diff, zeta, step);
      break;
    }
    case StepKind::kMinibatchSharedDirection: {
      sample_into(dist, rng, zeta);
      add_scaled(x, alpha, zeta, shifted);
      double mean_diff = 0.0;
      for (int i = 0; i < variant.batch_size; ++i) {
        const Sample xi = problem.draw_sample(rng);
        mean_diff +=
            checked(problem.sample_loss(x, xi), problem, "sample loss") -
            checked(problem.sample_loss(shifted, xi), problem, "sample loss");
      }
      axpy(mean_diff / n, zeta, step);
      break;
    }
    case StepKind::kNestedBatch: {
      const double m = static_cast<double>(variant.inner_batch);
      for (int i = 0; i < variant.batch_size; ++i) {
        sample_into(dist, rng, zeta);
        add_scaled(x, alpha, zeta, shifted);
        double inner = 0.0;
        for (int j = 0; j < variant.inner_batch; ++j) {
          const Sample xi = problem.draw_sample(rng);
          inner +=
              checked(problem.sample_loss(x, xi), problem, "sample loss") -
              checked(problem.sample_loss(shifted, xi), problem, "sample loss");
        }
        axpy(inner / (m * n), zeta, step);
      }
      break;
    }
    case StepKind::kPairedSampleDirection: {
      for (int i = 0; i < variant.batch_size; ++i) {
        sample_into(dist, rng, zeta);
        add_scaled(x, alpha, zeta, shifted);
        const Sample xi = problem.draw_sample(rng);
        const double diff =
            checked(problem.sample_loss(x, xi), problem, "sample loss") -
            checked(problem.sample_loss(shifted, xi), problem, "sample loss");
        axpy(diff / n, zeta, step);
      }
      break;
    }
    case StepKind::kFullObjectiveSingle: {
      sample_into(dist, rng, zeta);
      add_scaled(x, alpha, zeta, shifted);
      const double diff =
          checked(problem.full_objective(x), problem, "objective") -
          checked(problem.full_objective(shifted), problem, "objective");
      axpy(diff, zeta, step);
      break;
    }
    case StepKind::kFullObjectiveBatch: {
      const double fx = checked(problem.full_objective(x), problem, "objective");
      for (int i = 0; i < variant.batch_size; ++i) {
        sample_into(dist, rng, zeta);
        add_scaled(x, alpha, zeta, shifted);
        const double diff =
            fx - checked(problem.full_objective(shifted), problem, "objective");
        axpy(diff / n, zeta, step);
      }
      break;
    }
  }
  return step;
}

}  // namespace sgfd
