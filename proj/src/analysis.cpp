#include "sgfd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sgfd {

SignedLogGamma lgamma_signed(double x) {
  if (!std::isfinite(x))
    throw std::invalid_argument("lgamma_signed: argument must be finite");
  if (x > 0.0) return {std::lgamma(x), 1};
  if (x == std::floor(x))
    throw std::invalid_argument(
        "lgamma_signed: argument is a pole (nonpositive integer)");
  // On (-n-1, -n) the gamma function has sign (-1)^(n+1).
  const long n = static_cast<long>(std::floor(-x));
  const int sign = (n % 2 == 0) ? -1 : 1;
  return {std::lgamma(x), sign};
}

static void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string("bound params: ") + what +
                                " must be positive");
}

void check_bound_params(const BoundParams& params) {
  check_positive(params.beta, "beta");
  check_positive(params.sigma, "sigma");
  check_positive(params.l, "l");
  if (params.rate_divisor != 1 && params.rate_divisor != 2)
    throw std::invalid_argument("bound params: rate_divisor must be 1 or 2");
  const double tail = 1.0 + params.sigma - params.rate_exponent();
  if (tail <= 0.0 && tail == std::floor(tail)) {
    std::ostringstream msg;
    msg << "bound params: 1 + sigma - beta*l/divisor = " << tail
        << " is a nonpositive integer; the gamma representation has a pole";
    throw std::invalid_argument(msg.str());
  }
}

double contraction_product(const BoundParams& params, long k) {
  check_bound_params(params);
  if (k < 0) throw std::invalid_argument("contraction_product: k must be >= 0");
  if (k == 0) return 1.0;
  const double a = params.rate_exponent();
  const double s = params.sigma;
  const auto g1 = lgamma_signed(1.0 + s);
  const auto g2 = lgamma_signed(1.0 + s - a);
  const auto g3 = lgamma_signed(static_cast<double>(k) + 1.0 + s - a);
  const auto g4 = lgamma_signed(static_cast<double>(k) + 1.0 + s);
  const double log_abs = g1.log_abs - g2.log_abs + g3.log_abs - g4.log_abs;
  const int sign = g1.sign * g2.sign * g3.sign * g4.sign;
  return sign * std::exp(log_abs);
}

double contraction_product_direct(const BoundParams& params, long k) {
  check_bound_params(params);
  if (k < 0) throw std::invalid_argument("contraction_product: k must be >= 0");
  const double a = params.rate_exponent();
  double prod = 1.0;
  for (long i = 1; i <= k; ++i)
    prod *= 1.0 - a / (static_cast<double>(i) + params.sigma);
  return prod;
}

double noise_accumulation(const BoundParams& params, long k) {
  check_bound_params(params);
  if (k < 0) throw std::invalid_argument("noise_accumulation: k must be >= 0");
  if (k == 0) return 0.0;
  const double a = params.rate_exponent();
  const double s = params.sigma;
  // term_i = alpha_i^2 * G(k)/G(i) with G(n) = Gamma(n+1+sigma-a)/Gamma(n+1+sigma)
  const auto gk_num = lgamma_signed(static_cast<double>(k) + 1.0 + s - a);
  const auto gk_den = lgamma_signed(static_cast<double>(k) + 1.0 + s);
  const double log_gk = gk_num.log_abs - gk_den.log_abs;
  const int sign_gk = gk_num.sign * gk_den.sign;
  double sum = 0.0;
  for (long i = 1; i <= k; ++i) {
    const double alpha_i = params.beta / (static_cast<double>(i) + s);
    const auto gi_num = lgamma_signed(static_cast<double>(i) + 1.0 + s);
    const auto gi_den = lgamma_signed(static_cast<double>(i) + 1.0 + s - a);
    const double log_term = log_gk + gi_num.log_abs - gi_den.log_abs;
    const int sign = sign_gk * gi_num.sign * gi_den.sign;
    sum += alpha_i * alpha_i * sign * std::exp(log_term);
  }
  return sum;
}

double noise_accumulation_direct(const BoundParams& params, long k) {
  check_bound_params(params);
  if (k < 0) throw std::invalid_argument("noise_accumulation: k must be >= 0");
  const double a = params.rate_exponent();
  double b = 0.0;
  for (long i = 1; i <= k; ++i) {
    const double denom = static_cast<double>(i) + params.sigma;
    const double alpha_i = params.beta / denom;
    b = (1.0 - a / denom) * b + alpha_i * alpha_i;
  }
  return b;
}

double contraction_asymptote(const BoundParams& params) {
  check_bound_params(params);
  const double a = params.rate_exponent();
  const auto g1 = lgamma_signed(1.0 + params.sigma);
  const auto g2 = lgamma_signed(1.0 + params.sigma - a);
  return g1.sign * g2.sign * std::exp(g1.log_abs - g2.log_abs);
}

double noise_asymptote_coefficient(const BoundParams& params) {
  check_bound_params(params);
  const double a = params.rate_exponent();
  if (!(a > 1.0))
    throw std::invalid_argument(
        "noise_asymptote_coefficient: needs beta*l/divisor > 1");
  return params.beta * params.beta / (a - 1.0);
}

double fixed_step_noise_accumulation(double alpha, double l, long k) {
  check_positive(alpha, "alpha");
  check_positive(l, "l");
  if (k < 0) throw std::invalid_argument("fixed_step: k must be >= 0");
  const double r = 1.0 - alpha * l;
  // (alpha/l) * (1 - r^k); r^k underflows harmlessly to 0 for large k.
  return alpha / l * (1.0 - std::pow(r, static_cast<double>(k)));
}

double fixed_step_noise_limit(double alpha, double l) {
  check_positive(alpha, "alpha");
  check_positive(l, "l");
  return alpha / l;
}

double inverse_square_contraction(double beta_l, long k) {
  check_positive(beta_l, "beta*l");
  if (k < 0) throw std::invalid_argument("inverse_square: k must be >= 0");
  double prod = 1.0;
  for (long i = 1; i <= k; ++i) {
    const double di = static_cast<double>(i);
    prod *= 1.0 - beta_l / (di * di);
  }
  return prod;
}

double inverse_square_contraction_limit(double beta_l) {
  check_positive(beta_l, "beta*l");
  // prod_{i>=1} (1 - z^2/i^2) = sin(pi z)/(pi z) with z = sqrt(beta*l).
  const double z = std::sqrt(beta_l);
  return std::sin(std::numbers::pi * z) / (std::numbers::pi * z);
}

// ---------------------------------------------------------------- rate fit

RateFit fit_rate(std::span<const long> ks, std::span<const double> values,
                 long k_lo, long k_hi) {
  if (ks.size() != values.size())
    throw std::invalid_argument("fit_rate: ks/values length mismatch");
  if (k_lo > k_hi) throw std::invalid_argument("fit_rate: empty window");
  std::vector<double> xs, ys;
  long dropped = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < k_lo || ks[i] > k_hi) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      ++dropped;
      continue;
    }
    xs.push_back(std::log(static_cast<double>(ks[i])));
    ys.push_back(std::log(values[i]));
  }
  const long in_window = static_cast<long>(xs.size()) + dropped;
  if (in_window == 0)
    throw std::invalid_argument("fit_rate: no recorded points in window");
  if (dropped * 5 > in_window)
    throw std::invalid_argument(
        "fit_rate: more than 20% of the window's values are nonpositive");
  if (xs.size() < 2)
    throw std::invalid_argument("fit_rate: need at least two usable points");

  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double det = n * sxx - sx * sx;
  if (det <= 0.0)
    throw std::invalid_argument("fit_rate: degenerate abscissae");
  RateFit fit;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  fit.points_used = static_cast<long>(xs.size());
  fit.points_dropped = dropped;
  return fit;
}

RateFit fit_trace_gap_rate(const Trace& trace, std::optional<long> k_lo,
                           std::optional<long> k_hi) {
  std::vector<long> ks;
  std::vector<double> gaps;
  for (const auto& row : trace.rows) {
    if (!row.mean_gap) continue;
    ks.push_back(row.k);
    gaps.push_back(*row.mean_gap);
  }
  if (ks.empty())
    throw std::invalid_argument(
        "fit_trace_gap_rate: trace has no optimality-gap column (F* unknown)");
  const long hi = k_hi.value_or(trace.iterations);
  const long lo = k_lo.value_or(std::max<long>(1, trace.iterations / 10));
  return fit_rate(ks, gaps, lo, hi);
}

// ------------------------------------------------------------ step moments

StepMomentReport estimate_step_moments(const StochasticProblem& problem,
                                       const StepVariant& variant,
                                       const DirectionDistribution& dist,
                                       const Vec& x, double alpha,
                                       long n_samples, std::mt19937_64& rng) {
  if (n_samples < 2)
    throw std::invalid_argument("estimate_step_moments: n_samples must be >= 2");
  const std::size_t d = x.size();
  StepMomentReport report;
  report.mean_step.assign(d, 0.0);
  report.n_samples = n_samples;
  const bool have_objective = static_cast<bool>(problem.full_objective);
  double sum_delta = 0.0;
  Vec shifted(d);
  const double fx = have_objective
                        ? problem.full_objective(x)
                        : std::numeric_limits<double>::quiet_NaN();
  for (long i = 0; i < n_samples; ++i) {
    const Vec s = stochastic_step(problem, variant, dist, x, alpha, rng);
    axpy(1.0, s, report.mean_step);
    report.mean_step_sq += norm_sq(s);
    if (have_objective) {
      add_scaled(x, 1.0, s, shifted);
      sum_delta += problem.full_objective(shifted) - fx;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  for (auto& v : report.mean_step) v *= inv_n;
  report.mean_step_sq *= inv_n;
  report.variance = report.mean_step_sq - norm_sq(report.mean_step);
  if (have_objective) report.mean_objective_delta = sum_delta * inv_n;
  if (problem.constants.smoothness && problem.reference_gradient) {
    const double big_l = *problem.constants.smoothness;
    const Vec g = problem.reference_gradient(x);
    report.descent_bound = dot(g, report.mean_step) +
                           0.5 * big_l * norm_sq(report.mean_step) +
                           0.5 * big_l * report.variance;
  }
  return report;
}

// ------------------------------------------------------ variance model fit

VarianceModelFit fit_variance_model(const std::vector<double>& alphas,
                                    const std::vector<double>& grad_sqs,
                                    const std::vector<double>& variances) {
  const std::size_t n = alphas.size();
  if (grad_sqs.size() != n || variances.size() != n)
    throw std::invalid_argument("fit_variance_model: input length mismatch");
  if (n < 2)
    throw std::invalid_argument("fit_variance_model: need at least 2 probes");
  double g_min = std::numeric_limits<double>::infinity();
  double g_max = -std::numeric_limits<double>::infinity();
  for (double g : grad_sqs) {
    g_min = std::min(g_min, g);
    g_max = std::max(g_max, g);
  }
  if (!(g_max - g_min > 1e-12 * std::max(1.0, g_max)))
    throw std::invalid_argument(
        "fit_variance_model: degenerate probe grid (all probes share one "
        "gradient norm; the two regressors are collinear)");

  // Design columns: u_i = alpha_i^2, w_i = alpha_i^2 * grad_sq_i.
  double suu = 0, sww = 0, suw = 0, suy = 0, swy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = alphas[i] * alphas[i];
    const double w = u * grad_sqs[i];
    const double y = variances[i];
    suu += u * u;
    sww += w * w;
    suw += u * w;
    suy += u * y;
    swy += w * y;
    syy += y * y;
  }
  // Candidate solutions of the 2-variable nonnegative least squares: the
  // unconstrained stationary point and each active-set restriction.
  struct Candidate {
    double m, mv, sse;
  };
  std::vector<Candidate> cands;
  const double det = suu * sww - suw * suw;
  auto sse_of = [&](double m, double mv) {
    return syy - 2.0 * (m * suy + mv * swy) + m * m * suu +
           2.0 * m * mv * suw + mv * mv * sww;
  };
  if (det > 0.0) {
    const double m = (suy * sww - swy * suw) / det;
    const double mv = (swy * suu - suy * suw) / det;
    if (m >= 0.0 && mv >= 0.0) cands.push_back({m, mv, sse_of(m, mv)});
  }
  if (suu > 0.0) {
    const double m = std::max(0.0, suy / suu);
    cands.push_back({m, 0.0, sse_of(m, 0.0)});
  }
  if (sww > 0.0) {
    const double mv = std::max(0.0, swy / sww);
    cands.push_back({0.0, mv, sse_of(0.0, mv)});
  }
  cands.push_back({0.0, 0.0, syy});
  const auto best =
      std::min_element(cands.begin(), cands.end(),
                       [](const Candidate& a, const Candidate& b) {
                         return a.sse < b.sse;
                       });

  VarianceModelFit fit;
  fit.m_hat = best->m;
  fit.m_v_hat = best->mv;
  double fitted_sq = 0.0;
  double resid_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = alphas[i] * alphas[i];
    const double yhat = fit.m_hat * u + fit.m_v_hat * u * grad_sqs[i];
    fitted_sq += yhat * yhat;
    const double r = variances[i] - yhat;
    resid_sq += r * r;
  }
  fit.residual_rel =
      fitted_sq > 0.0 ? std::sqrt(resid_sq / fitted_sq)
                      : std::numeric_limits<double>::infinity();
  return fit;
}

double gradient_moment_factor(double m_v) { return m_v + 2.0; }

double step_noise_constant(double m, int dimension, double d_zeta) {
  const double d = static_cast<double>(dimension);
  return m + 1.25 * d * d * d * d_zeta * d_zeta;
}

// ---------------------------------------------------------------- envelope

EnvelopeReport envelope_pass_fraction(const Trace& trace,
                                      const BoundParams& params, double L,
                                      double m_d, double gap1) {
  check_bound_params(params);
  if (!(L > 0.0)) throw std::invalid_argument("envelope: L must be positive");
  if (trace.rows.empty())
    throw std::invalid_argument("envelope: empty trace");
  // March the exact recurrences for A and B alongside the recorded rows.
  const double a = params.rate_exponent();
  double prod = 1.0;  // A_i
  double b = 0.0;     // B_i
  long next_row = 0;
  EnvelopeReport report;
  report.m_d = m_d;
  for (long i = 1; i <= trace.iterations &&
                   next_row < static_cast<long>(trace.rows.size());
       ++i) {
    // At the top of pass i the accumulators hold A_{i-1} and B_{i-1}; the
    // iterate recorded at k is bounded against A_{k-1}, B_{k-1}, so consume
    // row k here when i == k, before the update below.
    const auto& row = trace.rows[static_cast<std::size_t>(next_row)];
    if (row.k == i) {
      if (row.k >= 2 && row.mean_gap) {
        const double envelope = prod * gap1 + 0.5 * L * m_d * b;
        ++report.checked;
        if (*row.mean_gap <= envelope) report.pass_fraction += 1.0;
      }
      ++next_row;
    }
    const double denom = static_cast<double>(i) + params.sigma;
    const double alpha_i = params.beta / denom;
    prod *= 1.0 - a / denom;
    b = (1.0 - a / denom) * b + alpha_i * alpha_i;
  }
  if (report.checked > 0)
    report.pass_fraction /= static_cast<double>(report.checked);
  return report;
}

}  // namespace sgfd
