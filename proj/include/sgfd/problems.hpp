#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>

#include "sgfd/vec.hpp"

namespace sgfd {

// One draw of the randomness xi entering the sample loss. Field meaning is
// problem-defined: finite-sum problems use `index` (which data point);
// noise-model problems use `payload` (the noise realization).
struct Sample {
  long index = -1;
  Vec payload;
};

struct ProblemConstants {
  std::optional<double> strong_convexity;  // l (smallest curvature)
  std::optional<double> smoothness;        // L (gradient Lipschitz constant)
  std::optional<double> optimal_value;     // F* (or inf F) when known
  std::optional<Vec> minimizer;            // x* when known
};

// A stochastic objective F(x) = E_xi[ f(x, xi) ] accessed only through
// sample-loss evaluations by the optimizer. The exact mean objective and its
// gradient are carried alongside for diagnostics and for the full-objective
// step variants; the optimizer's update path never reads the gradient.
struct StochasticProblem {
  std::string name;
  int dimension = 0;

  // f(x, xi). Always present.
  std::function<double(const Vec&, const Sample&)> sample_loss;

  // F(x). Empty when the mean objective is not available in closed form.
  std::function<double(const Vec&)> full_objective;

  // grad F(x), exact. Diagnostics only.
  std::function<Vec(const Vec&)> reference_gradient;

  // Draws xi. The caller owns the generator (counter-based seeding upstream).
  std::function<Sample(std::mt19937_64&)> draw_sample;

  // grad_x f(x, xi). Used only by the reference SGD baseline; may be empty.
  std::function<Vec(const Vec&, const Sample&)> sample_gradient;

  ProblemConstants constants;
};

// ---- quadratic ----
//
// F(x) = 1/2 (x - x*)' diag(lambda) (x - x*), minimizer x* drawn from the
// provided generator (components N(0,1)), F* = 0, l = min lambda,
// L = max lambda. The sample loss adds a zero-mean noise field on the
// function value: f(x, xi) = F(x) + noise_sd * eta(xi)'(x - x*) with
// eta ~ N(0, I). E_xi[f(x, xi)] = F(x) for every x, and the field gives the
// gradient-free step an alpha^2-scaled variance floor that grows with
// noise_sd.
StochasticProblem make_quadratic(const Vec& eigenvalues, double noise_sd,
                                 std::mt19937_64& rng);

// Convenience: eigenvalues evenly spaced on [1, condition].
Vec spaced_eigenvalues(int dimension, double condition);

// ---- logistic regression ----

struct Dataset {
  std::vector<Vec> features;  // one row per sample
  std::vector<int> labels;    // +1 / -1
  int dimension() const {
    return features.empty() ? 0 : static_cast<int>(features.front().size());
  }
  long size() const { return static_cast<long>(features.size()); }
};

// Delimited text (spaces, tabs or commas), one row per sample, label in the
// first column (+1/-1, also accepts 1/-1 with optional sign), features after.
// Validates rectangular shape, finiteness, and label domain.
Dataset load_dataset(const std::string& path);

// Synthetic dataset: rows a_i ~ N(0, I_d), labels drawn from the logistic
// model with a fixed planted weight vector. Deterministic given the generator.
Dataset make_synthetic_logistic_dataset(long n, int dimension,
                                        std::mt19937_64& rng);

// F(x) = (1/n) sum_i log(1 + exp(-y_i a_i'x)) + (l2/2) ||x||^2 over the
// dataset; xi is a uniformly random data index. l = l2,
// L = l2 + max_i ||a_i||^2 / 4. F* is computed at construction by a damped
// Newton reference minimization down to ||grad F|| <= 1e-10.
StochasticProblem make_logistic(const Dataset& data, double l2);

// ---- rosenbrock-like (nonconvex) ----
//
// F(x) = sum over pairs (x_1,x_2), (x_3,x_4), ... of
// (1 - x_odd)^2 + 100 (x_even - x_odd^2)^2 ; d must be even and >= 2.
// inf F = 0 at (1, ..., 1). The sample loss adds a bounded zero-mean field
// a*sin(u(xi)'x + phi(xi)), u ~ N(0, I), phi ~ U[0, 2pi), amplitude
// a = kRosenbrockNoiseAmplitude. No (l, L) constants are declared (the
// problem is nonconvex with unbounded curvature over R^d).
inline constexpr double kRosenbrockNoiseAmplitude = 0.05;

StochasticProblem make_rosenbrock_like(int dimension);

// Reference minimization used for the logistic F*: damped Newton descent on
// a smooth strongly convex objective; returns the minimizer. Exposed for
// tests.
Vec newton_minimize(const std::function<double(const Vec&)>& f,
                    const std::function<Vec(const Vec&)>& grad,
                    const std::function<std::vector<Vec>(const Vec&)>& hessian,
                    Vec x0, double grad_tol, int max_iter = 200);

}  // namespace sgfd
