#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sgfd {

enum class ScheduleKind {
  kRobbinsMonro,   // alpha_k = beta / (k + sigma)
  kFixed,          // alpha_k = alpha_bar
  kInverseSquare,  // alpha_k = beta / k^2 (diagnostic; sum converges, so the
                   // iterates stall short of the optimum by design)
};

struct StepsizeSchedule {
  ScheduleKind kind = ScheduleKind::kRobbinsMonro;
  double beta = 0.0;
  double sigma = 0.0;
  double alpha_bar = 0.0;

  static StepsizeSchedule robbins_monro(double beta, double sigma);
  static StepsizeSchedule fixed(double alpha_bar);
  static StepsizeSchedule inverse_square(double beta);

  // Stepsize for iteration k >= 1. Positive and non-increasing in k for
  // every kind.
  double stepsize(long k) const;
};

enum class OptimizerKind { kPlain, kMomentum };

// Problem constants available for the feasibility check; unknown entries
// skip their checks (recorded as warnings rather than errors).
struct FeasibilityContext {
  std::optional<double> strong_convexity;  // l
  std::optional<double> smoothness;        // L
  // M_G = M_V + 2 for the plain method; default assumes M_V = 1.
  double gradient_factor_plain = 3.0;
  // Momentum uses the limit value 3/2 of its gradient factor with a safety
  // factor of 2 applied.
  double gradient_factor_momentum = 3.0;
};

// Validates the stepsize growth conditions:
//   plain Robbins-Monro:    beta > 1/l, sigma > 0, alpha_1 <= 1/(L*M_G)
//   momentum Robbins-Monro: beta > 4/l, sigma > 0, alpha_1 <= 1/(L*M_G)
//   fixed:                  alpha_bar <= 1/(L*M_G)
//   inverse-square:         no condition (always warned as diagnostic-only)
// Throws std::invalid_argument naming the violated inequality. Returns the
// list of warnings for checks that were skipped because a constant is
// unknown (or because the schedule is diagnostic-only).
std::vector<std::string> check_feasibility(const StepsizeSchedule& schedule,
                                           const FeasibilityContext& ctx,
                                           OptimizerKind optimizer);

}  // namespace sgfd
