#include "sgfd/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgfd {

static void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

StepsizeSchedule StepsizeSchedule::robbins_monro(double beta, double sigma) {
  require(std::isfinite(beta) && beta > 0.0,
          "stepsize schedule: beta must be positive");
  require(std::isfinite(sigma) && sigma > 0.0,
          "stepsize schedule: sigma must be positive");
  StepsizeSchedule s;
  s.kind = ScheduleKind::kRobbinsMonro;
  s.beta = beta;
  s.sigma = sigma;
  return s;
}

StepsizeSchedule StepsizeSchedule::fixed(double alpha_bar) {
  require(std::isfinite(alpha_bar) && alpha_bar > 0.0,
          "stepsize schedule: alpha_bar must be positive");
  StepsizeSchedule s;
  s.kind = ScheduleKind::kFixed;
  s.alpha_bar = alpha_bar;
  return s;
}

StepsizeSchedule StepsizeSchedule::inverse_square(double beta) {
  require(std::isfinite(beta) && beta > 0.0,
          "stepsize schedule: beta must be positive");
  StepsizeSchedule s;
  s.kind = ScheduleKind::kInverseSquare;
  s.beta = beta;
  return s;
}

double StepsizeSchedule::stepsize(long k) const {
  if (k < 1) throw std::invalid_argument("stepsize: iteration index k >= 1");
  switch (kind) {
    case ScheduleKind::kRobbinsMonro:
      return beta / (static_cast<double>(k) + sigma);
    case ScheduleKind::kFixed:
      return alpha_bar;
    case ScheduleKind::kInverseSquare:
      return beta / (static_cast<double>(k) * static_cast<double>(k));
  }
  throw std::logic_error("stepsize: unknown schedule kind");
}

std::vector<std::string> check_feasibility(const StepsizeSchedule& schedule,
                                           const FeasibilityContext& ctx,
                                           OptimizerKind optimizer) {
  std::vector<std::string> warnings;
  const bool momentum = optimizer == OptimizerKind::kMomentum;
  const double m_g =
      momentum ? ctx.gradient_factor_momentum : ctx.gradient_factor_plain;

  auto alpha_cap_check = [&](double alpha_first, const char* what) {
    if (!ctx.smoothness) {
      warnings.emplace_back(
          std::string("smoothness constant unknown; ") + what +
          " cap alpha <= 1/(L*M_G) not checked");
      return;
    }
    const double cap = 1.0 / (*ctx.smoothness * m_g);
    if (alpha_first > cap) {
      std::ostringstream msg;
      msg << "infeasible stepsize schedule: first stepsize " << alpha_first
          << " exceeds 1/(L*M_G) = " << cap << " (L = " << *ctx.smoothness
          << ", M_G = " << m_g << ")";
      throw std::invalid_argument(msg.str());
    }
  };

  switch (schedule.kind) {
    case ScheduleKind::kRobbinsMonro: {
      if (!ctx.strong_convexity) {
        warnings.emplace_back(
            "strong convexity constant unknown; beta growth condition not "
            "checked");
      } else {
        const double l = *ctx.strong_convexity;
        const double required = momentum ? 4.0 / l : 1.0 / l;
        if (!(schedule.beta > required)) {
          std::ostringstream msg;
          msg << "infeasible stepsize schedule: beta = " << schedule.beta
              << " must exceed " << (momentum ? "4/l" : "1/l") << " = "
              << required << " (beta*l = " << schedule.beta * l << ")";
          throw std::invalid_argument(msg.str());
        }
      }
      alpha_cap_check(schedule.stepsize(1), "first-iteration");
      break;
    }
    case ScheduleKind::kFixed:
      alpha_cap_check(schedule.alpha_bar, "fixed-stepsize");
      break;
    case ScheduleKind::kInverseSquare:
      warnings.emplace_back(
          "inverse-square schedule is diagnostic-only; its stepsize sum "
          "converges and the iterates stall short of the optimum");
      break;
  }
  return warnings;
}

}  // namespace sgfd
