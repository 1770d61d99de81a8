#include "sgfd/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sgfd {

// ---------------------------------------------------------------- quadratic

Vec spaced_eigenvalues(int dimension, double condition) {
  if (dimension < 1)
    throw std::invalid_argument("spaced_eigenvalues: dimension must be >= 1");
  if (condition < 1.0)
    throw std::invalid_argument("spaced_eigenvalues: condition must be >= 1");
  if (dimension == 1) {
    if (condition != 1.0)
      throw std::invalid_argument(
          "spaced_eigenvalues: condition > 1 needs dimension >= 2");
    return Vec{1.0};
  }
  Vec lambda(static_cast<std::size_t>(dimension));
  for (int i = 0; i < dimension; ++i)
    lambda[static_cast<std::size_t>(i)] =
        1.0 + (condition - 1.0) * static_cast<double>(i) /
                  static_cast<double>(dimension - 1);
  return lambda;
}

StochasticProblem make_quadratic(const Vec& eigenvalues, double noise_sd,
                                 std::mt19937_64& rng) {
  if (eigenvalues.empty())
    throw std::invalid_argument("quadratic: eigenvalue list is empty");
  for (double lam : eigenvalues)
    if (!(lam > 0.0) || !std::isfinite(lam))
      throw std::invalid_argument("quadratic: eigenvalues must be positive");
  if (noise_sd < 0.0 || !std::isfinite(noise_sd))
    throw std::invalid_argument("quadratic: noise_sd must be >= 0");

  const std::size_t d = eigenvalues.size();
  Vec x_star(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : x_star) v = normal(rng);

  const Vec lambda = eigenvalues;

  StochasticProblem p;
  p.name = "quadratic";
  p.dimension = static_cast<int>(d);
  p.full_objective = [lambda, x_star](const Vec& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      const double z = x[i] - x_star[i];
      s += lambda[i] * z * z;
    }
    return 0.5 * s;
  };
  p.reference_gradient = [lambda, x_star](const Vec& x) {
    Vec g(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i)
      g[i] = lambda[i] * (x[i] - x_star[i]);
    return g;
  };
  p.draw_sample = [d](std::mt19937_64& r) {
    Sample s;
    s.payload.resize(d);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& v : s.payload) v = n01(r);
    return s;
  };
  auto full = p.full_objective;
  p.sample_loss = [full, x_star, noise_sd](const Vec& x, const Sample& xi) {
    double field = 0.0;
    for (std::size_t i = 0; i < x_star.size(); ++i)
      field += xi.payload[i] * (x[i] - x_star[i]);
    return full(x) + noise_sd * field;
  };
  auto grad = p.reference_gradient;
  p.sample_gradient = [grad, noise_sd](const Vec& x, const Sample& xi) {
    Vec g = grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += noise_sd * xi.payload[i];
    return g;
  };
  p.constants.strong_convexity =
      *std::min_element(lambda.begin(), lambda.end());
  p.constants.smoothness = *std::max_element(lambda.begin(), lambda.end());
  p.constants.optimal_value = 0.0;
  p.constants.minimizer = x_star;
  return p;
}

// -------------------------------------------------------- logistic datasets

static bool parse_label(const std::string& tok, int& out) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) return false;
    if (v == 1.0) { out = 1; return true; }
    if (v == -1.0) { out = -1; return true; }
  } catch (const std::exception&) {
    return false;
  }
  return false;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open file: " + path);
  Dataset data;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Split on commas and whitespace.
    std::string norm_line = line;
    std::replace(norm_line.begin(), norm_line.end(), ',', ' ');
    std::istringstream row(norm_line);
    std::vector<std::string> toks;
    std::string tok;
    while (row >> tok) toks.push_back(tok);
    if (toks.empty()) continue;  // blank line
    if (toks.size() < 2)
      throw std::runtime_error("dataset: line " + std::to_string(line_no) +
                               ": need a label and at least one feature");
    int label = 0;
    if (!parse_label(toks.front(), label))
      throw std::runtime_error("dataset: line " + std::to_string(line_no) +
                               ": label must be +1 or -1, got '" +
                               toks.front() + "'");
    Vec feat(toks.size() - 1);
    for (std::size_t j = 1; j < toks.size(); ++j) {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(toks[j], &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != toks[j].size() || !std::isfinite(v))
        throw std::runtime_error("dataset: line " + std::to_string(line_no) +
                                 ": feature '" + toks[j] +
                                 "' is not a finite number");
      feat[j - 1] = v;
    }
    if (width == 0) width = feat.size();
    if (feat.size() != width)
      throw std::runtime_error("dataset: line " + std::to_string(line_no) +
                               ": row has " + std::to_string(feat.size()) +
                               " features, expected " + std::to_string(width));
    data.features.push_back(std::move(feat));
    data.labels.push_back(label);
  }
  if (data.features.empty())
    throw std::runtime_error("dataset: file has no data rows: " + path);
  return data;
}

Dataset make_synthetic_logistic_dataset(long n, int dimension,
                                        std::mt19937_64& rng) {
  if (n < 1 || dimension < 1)
    throw std::invalid_argument("synthetic dataset: n and dimension >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec w(static_cast<std::size_t>(dimension));
  const double scale = 1.5 / std::sqrt(static_cast<double>(dimension));
  for (auto& v : w) v = scale * normal(rng);
  Dataset data;
  data.features.reserve(static_cast<std::size_t>(n));
  data.labels.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Vec a(static_cast<std::size_t>(dimension));
    for (auto& v : a) v = normal(rng);
    const double margin = dot(a, w);
    const double p_plus = 1.0 / (1.0 + std::exp(-margin));
    data.labels.push_back(unit(rng) < p_plus ? 1 : -1);
    data.features.push_back(std::move(a));
  }
  return data;
}

// ------------------------------------------------------- logistic objective

// log(1 + exp(z)), overflow-safe.
static double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

static double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Dense SPD solve via Cholesky; a is row-major d x d, overwritten.
static Vec cholesky_solve(std::vector<Vec> a, Vec b) {
  const std::size_t d = b.size();
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a[j][j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j][k] * a[j][k];
    if (diag <= 0.0)
      throw std::runtime_error("cholesky: matrix not positive definite");
    a[j][j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
  }
  // forward: L y = b
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * b[k];
    b[i] = s / a[i][i];
  }
  // backward: L' x = y
  for (std::size_t ii = d; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < d; ++k) s -= a[k][ii] * b[k];
    b[ii] = s / a[ii][ii];
  }
  return b;
}

Vec newton_minimize(const std::function<double(const Vec&)>& f,
                    const std::function<Vec(const Vec&)>& grad,
                    const std::function<std::vector<Vec>(const Vec&)>& hessian,
                    Vec x0, double grad_tol, int max_iter) {
  Vec x = std::move(x0);
  for (int it = 0; it < max_iter; ++it) {
    Vec g = grad(x);
    if (norm(g) <= grad_tol) return x;
    Vec step = cholesky_solve(hessian(x), g);
    for (auto& v : step) v = -v;
    const double fx = f(x);
    const double slope = dot(g, step);
    double t = 1.0;
    Vec trial;
    for (int ls = 0; ls < 60; ++ls) {
      add_scaled(x, t, step, trial);
      if (f(trial) <= fx + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    x = std::move(trial);
  }
  if (norm(grad(x)) > grad_tol)
    throw std::runtime_error(
        "newton_minimize: did not reach gradient tolerance");
  return x;
}

StochasticProblem make_logistic(const Dataset& data, double l2) {
  if (data.features.empty())
    throw std::invalid_argument("logistic: dataset is empty");
  if (!(l2 > 0.0) || !std::isfinite(l2))
    throw std::invalid_argument("logistic: l2 must be > 0");
  const std::size_t d = data.features.front().size();
  for (const auto& row : data.features)
    if (row.size() != d)
      throw std::invalid_argument("logistic: ragged feature matrix");
  for (int y : data.labels)
    if (y != 1 && y != -1)
      throw std::invalid_argument("logistic: labels must be +1/-1");

  // Copy rows into the closures (problems own their data).
  const auto rows = data.features;
  const auto labels = data.labels;
  const auto n = static_cast<double>(rows.size());

  StochasticProblem p;
  p.name = "logistic";
  p.dimension = static_cast<int>(d);
  p.sample_loss = [rows, labels, l2](const Vec& x, const Sample& xi) {
    if (xi.index < 0 || xi.index >= static_cast<long>(rows.size()))
      throw std::invalid_argument("logistic: sample index out of range");
    const auto i = static_cast<std::size_t>(xi.index);
    const double t = static_cast<double>(labels[i]) * dot(rows[i], x);
    return softplus(-t) + 0.5 * l2 * norm_sq(x);
  };
  p.full_objective = [rows, labels, l2, n](const Vec& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      s += softplus(-static_cast<double>(labels[i]) * dot(rows[i], x));
    return s / n + 0.5 * l2 * norm_sq(x);
  };
  p.reference_gradient = [rows, labels, l2, n](const Vec& x) {
    Vec g(x.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double y = static_cast<double>(labels[i]);
      const double coeff = -y * sigmoid(-y * dot(rows[i], x));
      axpy(coeff, rows[i], g);
    }
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = g[j] / n + l2 * x[j];
    return g;
  };
  p.sample_gradient = [rows, labels, l2](const Vec& x, const Sample& xi) {
    const auto i = static_cast<std::size_t>(xi.index);
    const double y = static_cast<double>(labels[i]);
    const double coeff = -y * sigmoid(-y * dot(rows[i], x));
    Vec g(x.size(), 0.0);
    axpy(coeff, rows[i], g);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += l2 * x[j];
    return g;
  };
  const long count = static_cast<long>(rows.size());
  p.draw_sample = [count](std::mt19937_64& r) {
    Sample s;
    std::uniform_int_distribution<long> pick(0, count - 1);
    s.index = pick(r);
    return s;
  };

  double max_row_sq = 0.0;
  for (const auto& row : rows) max_row_sq = std::max(max_row_sq, norm_sq(row));
  p.constants.strong_convexity = l2;
  p.constants.smoothness = l2 + max_row_sq / 4.0;

  auto hessian = [rows, labels, l2, n](const Vec& x) {
    const std::size_t dd = x.size();
    std::vector<Vec> h(dd, Vec(dd, 0.0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double t = static_cast<double>(labels[i]) * dot(rows[i], x);
      const double w = sigmoid(t) * sigmoid(-t) / n;
      for (std::size_t r = 0; r < dd; ++r)
        for (std::size_t c = 0; c <= r; ++c) h[r][c] += w * rows[i][r] * rows[i][c];
    }
    for (std::size_t r = 0; r < dd; ++r) {
      h[r][r] += l2;
      for (std::size_t c = r + 1; c < dd; ++c) h[r][c] = h[c][r];
    }
    return h;
  };
  const Vec x_min = newton_minimize(p.full_objective, p.reference_gradient,
                                    hessian, Vec(d, 0.0), 1e-10);
  p.constants.optimal_value = p.full_objective(x_min);
  p.constants.minimizer = x_min;
  return p;
}

// ---------------------------------------------------------- rosenbrock-like

StochasticProblem make_rosenbrock_like(int dimension) {
  if (dimension < 2 || dimension % 2 != 0)
    throw std::invalid_argument(
        "rosenbrock_like: dimension must be even and >= 2");
  const std::size_t d = static_cast<std::size_t>(dimension);

  StochasticProblem p;
  p.name = "rosenbrock_like";
  p.dimension = dimension;
  p.full_objective = [d](const Vec& x) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < d; i += 2) {
      const double o = x[i], e = x[i + 1];
      const double a = 1.0 - o, b = e - o * o;
      s += a * a + 100.0 * b * b;
    }
    return s;
  };
  p.reference_gradient = [d](const Vec& x) {
    Vec g(d, 0.0);
    for (std::size_t i = 0; i + 1 < d; i += 2) {
      const double o = x[i], e = x[i + 1];
      const double b = e - o * o;
      g[i] = -2.0 * (1.0 - o) - 400.0 * o * b;
      g[i + 1] = 200.0 * b;
    }
    return g;
  };
  p.draw_sample = [d](std::mt19937_64& r) {
    Sample s;
    s.payload.resize(d + 1);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t i = 0; i < d; ++i) s.payload[i] = n01(r);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    s.payload[d] = angle(r);
    return s;
  };
  auto full = p.full_objective;
  p.sample_loss = [full, d](const Vec& x, const Sample& xi) {
    double ux = 0.0;
    for (std::size_t i = 0; i < d; ++i) ux += xi.payload[i] * x[i];
    return full(x) + kRosenbrockNoiseAmplitude * std::sin(ux + xi.payload[d]);
  };
  auto grad = p.reference_gradient;
  p.sample_gradient = [grad, d](const Vec& x, const Sample& xi) {
    double ux = 0.0;
    for (std::size_t i = 0; i < d; ++i) ux += xi.payload[i] * x[i];
    const double c = kRosenbrockNoiseAmplitude * std::cos(ux + xi.payload[d]);
    Vec g = grad(x);
    for (std::size_t i = 0; i < d; ++i) g[i] += c * xi.payload[i];
    return g;
  };
  p.constants.optimal_value = 0.0;
  p.constants.minimizer = Vec(d, 1.0);
  return p;
}

}  // namespace sgfd
