#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sgfd/directions.hpp"
#include "sgfd/problems.hpp"
#include "sgfd/runner.hpp"
#include "sgfd/step.hpp"

namespace sgfd {

// Parameters of the Robbins-Monro decay bound with stepsizes
// alpha_i = beta/(i+sigma) and contraction factors (1 - alpha_i*l/divisor).
// rate_divisor = 1 for the plain method, 2 for the momentum analysis (whose
// contraction carries l/2).
struct BoundParams {
  double beta = 0.0;
  double sigma = 0.0;
  double l = 0.0;
  int rate_divisor = 1;

  double rate_exponent() const { return beta * l / rate_divisor; }
};

// Sign-aware log-gamma: log|Gamma(x)| and sign(Gamma(x)). x must not be a
// pole (zero or negative integer).
struct SignedLogGamma {
  double log_abs;
  int sign;
};
SignedLogGamma lgamma_signed(double x);

// Throws std::invalid_argument when the gamma representation of the bound is
// undefined for these parameters, i.e. 1 + sigma - beta*l/divisor is zero or
// a negative integer.
void check_bound_params(const BoundParams& params);

// A_k = prod_{i=1..k} (1 - alpha_i l / divisor), evaluated through the
// gamma-function ratio Gamma(1+sigma)/Gamma(1+sigma-a) *
// Gamma(k+1+sigma-a)/Gamma(k+1+sigma) with a = beta*l/divisor, in log domain
// with sign tracking. Decays like k^{-a}.
double contraction_product(const BoundParams& params, long k);

// Independent oracle: the same product accumulated term by term.
double contraction_product_direct(const BoundParams& params, long k);

// B_k = sum_{i=1..k} alpha_i^2 prod_{j=i+1..k} (1 - alpha_j l / divisor),
// evaluated by log-domain gamma ratios per term. Decays like 1/k (for
// a > 1).
double noise_accumulation(const BoundParams& params, long k);

// Independent oracle: the recurrence B_i = (1 - alpha_i l/div) B_{i-1} +
// alpha_i^2.
double noise_accumulation_direct(const BoundParams& params, long k);

// lim_k A_k * k^a = Gamma(1+sigma)/Gamma(1+sigma-a).
double contraction_asymptote(const BoundParams& params);

// lim_k B_k * (k+1+sigma) = beta^2/(a-1); requires a > 1.
double noise_asymptote_coefficient(const BoundParams& params);

// Fixed stepsize alpha: B_k = alpha^2 sum_{i=1..k} (1-alpha*l)^{k-i}
// = (alpha/l) (1 - (1-alpha*l)^k), and its limit alpha/l.
double fixed_step_noise_accumulation(double alpha, double l, long k);
double fixed_step_noise_limit(double alpha, double l);

// Inverse-square stepsizes beta/k^2: A_k = prod (1 - beta*l/i^2) converges
// to the positive limit sin(pi sqrt(beta*l)) / (pi sqrt(beta*l)) when
// beta*l < 1 — the iterates stall short of the optimum.
double inverse_square_contraction(double beta_l, long k);
double inverse_square_contraction_limit(double beta_l);

// ---- empirical rate fitting ----

struct RateFit {
  double slope = 0.0;      // d log(value) / d log(k)
  double intercept = 0.0;  // log(value) at log(k) = 0
  double residual_rms = 0.0;
  long points_used = 0;
  long points_dropped = 0;  // nonpositive values inside the window
};

// Least-squares fit of log(value) against log(k) over k in [k_lo, k_hi].
// Nonpositive values are dropped (reported); more than 20% dropped is an
// error, as is an empty window.
RateFit fit_rate(std::span<const long> ks, std::span<const double> values,
                 long k_lo, long k_hi);

// Convenience: fit the mean optimality gap of a trace (window defaulting to
// [K/10, K]).
RateFit fit_trace_gap_rate(const Trace& trace, std::optional<long> k_lo = {},
                           std::optional<long> k_hi = {});

// ---- step-moment estimation ----

struct StepMomentReport {
  Vec mean_step;                  // E[s]
  double mean_step_sq = 0.0;      // E[||s||^2]
  double variance = 0.0;          // E||s||^2 - ||E s||^2
  // grad F(x)'E[s] + (L/2)||E[s]||^2 + (L/2) V[s]; the expected-descent
  // upper bound on E[F(x+s)] - F(x). Set when L is known.
  std::optional<double> descent_bound;
  // E[F(x+s)] - F(x) over the same draws (paired); needs F.
  std::optional<double> mean_objective_delta;
  long n_samples = 0;
};

// Monte-Carlo moments of the step at a fixed probe point.
StepMomentReport estimate_step_moments(const StochasticProblem& problem,
                                       const StepVariant& variant,
                                       const DirectionDistribution& dist,
                                       const Vec& x, double alpha,
                                       long n_samples, std::mt19937_64& rng);

// ---- variance-model fit ----

struct VarianceModelFit {
  double m_hat = 0.0;    // coefficient of alpha^2
  double m_v_hat = 0.0;  // coefficient of alpha^2*||grad F||^2
  double residual_rel = 0.0;  // RMS residual / RMS fitted value
};

// Nonnegative least squares of V[s] against alpha^2*(1, ||grad F(x)||^2)
// over a grid of probes (constrained active-set solve, not a clipped
// unconstrained solve). Errors when the grid is degenerate (all probes share
// one gradient norm, making the two regressors collinear).
VarianceModelFit fit_variance_model(const std::vector<double>& alphas,
                                    const std::vector<double>& grad_sqs,
                                    const std::vector<double>& variances);

// Derived bound constants: M_G = M_V + 2 and M_d = M + (5/4) d^3 d_zeta^2.
double gradient_moment_factor(double m_v);
double step_noise_constant(double m, int dimension, double d_zeta);

// ---- envelope check ----

struct EnvelopeReport {
  double pass_fraction = 0.0;  // recorded k with gap <= envelope
  long checked = 0;
  double m_d = 0.0;  // the M_d used
};

// One-sided check of the decay envelope
//   mean_gap(x_k) <= A_{k-1} * gap_1 + (L*M_d/2) * B_{k-1}
// over the recorded rows of a Robbins-Monro trace (rows with k >= 2).
EnvelopeReport envelope_pass_fraction(const Trace& trace,
                                      const BoundParams& params, double L,
                                      double m_d, double gap1);

}  // namespace sgfd
