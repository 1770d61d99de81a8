#include "sgfd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "sgfd/analysis.hpp"
#include "sgfd/experiment.hpp"
#include "sgfd/momentum.hpp"
#include "sgfd/problems.hpp"
#include "sgfd/rng.hpp"
#include "sgfd/runner.hpp"
#include "sgfd/schedule.hpp"
#include "sgfd/step.hpp"
#include "sgfd/trace_io.hpp"

namespace sgfd {

namespace {

// Five fixed master seeds: the rate criteria must hold for at least 4 of 5.
constexpr std::uint64_t kMasterSeeds[5] = {1001, 2002, 3003, 4004, 5005};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

CheckResult guarded(const std::string& id, const std::string& name,
                    const std::function<CheckResult()>& body) {
  try {
    CheckResult r = body();
    r.id = id;
    r.name = name;
    return r;
  } catch (const std::exception& e) {
    CheckResult r;
    r.id = id;
    r.name = name;
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
    return r;
  }
}

void emit(std::vector<CheckResult>& out,
          const std::function<void(const CheckResult&)>& on_result,
          CheckResult r) {
  if (on_result) on_result(r);
  out.push_back(std::move(r));
}

// ------------------------------------------------------------ direction laws

struct DirectionStats {
  double worst_mean = 0.0;
  double mean_bound = 0.0;
  double worst_cov_dev = 0.0;
  double cov_bound = 0.0;
  double recon = 0.0;
  double recon_bound = 0.0;
  double third = 0.0;
  double third_bound = 0.0;

  double worst_ratio() const {
    return std::max({worst_mean / mean_bound, worst_cov_dev / cov_bound,
                     recon / recon_bound, third / third_bound});
  }
  bool pass() const { return worst_ratio() <= 1.0; }
};

DirectionStats measure_direction_stats(const DirectionDistribution& dist,
                                       long n, double recon_bound,
                                       std::uint64_t seed) {
  const int d = dist.dimension;
  const auto moments = moment_constants(dist);
  StreamSeeder seeder(seed);
  auto rng = seeder.stream(0, 0);

  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  std::vector<double> second(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> z(static_cast<std::size_t>(d));
  for (long i = 0; i < n; ++i) {
    sample_into(dist, rng, z);
    for (int a = 0; a < d; ++a) {
      mean[a] += z[a];
      for (int b = a; b < d; ++b) second[static_cast<std::size_t>(a) * d + b] += z[a] * z[b];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : mean) v *= inv_n;

  DirectionStats stats;
  stats.mean_bound = 4.0 / std::sqrt(static_cast<double>(n));
  stats.cov_bound = 0.02;
  stats.recon_bound = recon_bound;
  for (int a = 0; a < d; ++a)
    stats.worst_mean = std::max(stats.worst_mean, std::abs(mean[a]));
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      const double cov =
          second[static_cast<std::size_t>(a) * d + b] * inv_n - mean[a] * mean[b];
      const double target = (a == b) ? 1.0 : 0.0;
      stats.worst_cov_dev = std::max(stats.worst_cov_dev, std::abs(cov - target));
    }

  Vec e1(static_cast<std::size_t>(d), 0.0);
  e1[0] = 1.0;
  auto rng_recon = seeder.stream(1, 0);
  stats.recon = reconstruction_error(dist, e1, n, rng_recon);

  auto rng_third = seeder.stream(2, 0);
  stats.third = third_moment_norm(dist, n, rng_third);
  stats.third_bound = std::pow(static_cast<double>(d), 1.5) * moments.d_zeta *
                      (1.0 + 5.0 / std::sqrt(static_cast<double>(n)));
  return stats;
}

CheckResult direction_law_check(const std::vector<int>& dims, long n,
                                double recon_bound) {
  CheckResult r;
  r.threshold = 1.0;
  double worst = 0.0;
  std::ostringstream detail;
  bool all_pass = true;
  for (const DirectionLaw law :
       {DirectionLaw::kUniformSymmetric, DirectionLaw::kStandardNormal}) {
    for (int d : dims) {
      const DirectionDistribution dist{law, d};
      const char* label =
          law == DirectionLaw::kUniformSymmetric ? "uniform" : "normal";
      const auto stats = measure_direction_stats(
          dist, n, recon_bound, 0xD19EC700u + static_cast<std::uint64_t>(d));
      all_pass = all_pass && stats.pass();
      worst = std::max(worst, stats.worst_ratio());
      detail << label << " d=" << d << ": mean " << fmt(stats.worst_mean) << "/"
             << fmt(stats.mean_bound) << ", cov " << fmt(stats.worst_cov_dev)
             << "/" << fmt(stats.cov_bound) << ", recon " << fmt(stats.recon)
             << "/" << fmt(stats.recon_bound) << ", third " << fmt(stats.third)
             << "/" << fmt(stats.third_bound) << "; ";
    }
  }
  r.pass = all_pass;
  r.statistic = worst;
  r.detail = "worst measured/bound ratio " + fmt(worst) + " (" + detail.str() +
             "n=" + std::to_string(n) + ")";
  return r;
}

// --------------------------------------------------- asymptotic unbiasedness

// On a noiseless quadratic probed at its minimizer the finite-difference
// step satisfies s/alpha = -(alpha/2)(zeta' H zeta) zeta exactly, so with
// common random numbers across levels the bias norm scales exactly linearly
// in alpha. Measures the scaling order of ||mean(s/alpha) + grad F(x)||.
CheckResult unbiasedness_check(long n) {
  CheckResult r;
  r.threshold = 0.8;
  StreamSeeder seeder(0xB1A5ull);
  auto rng_con = seeder.stream(StreamSeeder::kConstructionReplication, 0);
  const auto problem =
      make_quadratic(spaced_eigenvalues(10, 10.0), 0.0, rng_con);
  const Vec probe = *problem.constants.minimizer;
  const Vec grad = problem.reference_gradient(probe);
  const DirectionDistribution dist{DirectionLaw::kUniformSymmetric, 10};
  const StepVariant variant{StepKind::kSingleSample, 1, 1};

  const std::vector<double> alphas = {0.1, 0.05, 0.025, 0.0125};
  std::vector<double> errors;
  for (double alpha : alphas) {
    // Fresh stream with the same seed per level: common random numbers.
    auto rng = seeder.stream(StreamSeeder::kProbeReplication, 0);
    const auto moments =
        estimate_step_moments(problem, variant, dist, probe, alpha, n, rng);
    Vec biased = grad;
    axpy(1.0 / alpha, moments.mean_step, biased);
    errors.push_back(norm(biased));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i)
    monotone = monotone && errors[i] < errors[i - 1];

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double x = std::log(alphas[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(alphas.size());
  const double order = (m * sxy - sx * sy) / (m * sxx - sx * sx);

  r.statistic = order;
  r.pass = monotone && order >= r.threshold;
  std::ostringstream detail;
  detail << "bias norms";
  for (std::size_t i = 0; i < alphas.size(); ++i)
    detail << " " << fmt(alphas[i]) << "->" << fmt(errors[i]);
  detail << "; order " << fmt(order) << " (need >= 0.8 and monotone decrease; "
         << "n=" << n << " per level, common random numbers)";
  r.detail = detail.str();
  return r;
}

// ------------------------------------------------------- rate-check plumbing

struct SeedOutcome {
  std::uint64_t seed = 0;
  double sgfd_slope = 0.0;
  double momentum_slope = 0.0;
  bool sgfd_ok = false;
  bool momentum_ok = false;
  Trace sgfd_trace;
  StochasticProblem problem;
  Vec x1;
};

Vec offset_start(const StochasticProblem& problem, double offset) {
  Vec x1 = *problem.constants.minimizer;
  for (auto& v : x1) v += offset;
  return x1;
}

SeedOutcome run_rate_pair(std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  StreamSeeder seeder(seed);
  auto rng_con = seeder.stream(StreamSeeder::kConstructionReplication, 0);
  out.problem = make_quadratic(spaced_eigenvalues(10, 10.0), 1.0, rng_con);
  out.x1 = offset_start(out.problem, 0.5);

  RunConfig plain;
  plain.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  plain.schedule = StepsizeSchedule::robbins_monro(2.0, 60.0);
  plain.directions = DirectionDistribution{DirectionLaw::kUniformSymmetric, 10};
  plain.iterations = 10000;
  plain.replications = 50;
  plain.seed = seed;
  plain.record_stride = 10;
  plain.x1 = out.x1;
  out.sgfd_trace = run_sgfd(out.problem, plain);
  out.sgfd_slope = fit_trace_gap_rate(out.sgfd_trace, 1000, 10000).slope;
  out.sgfd_ok = out.sgfd_slope >= -1.35 && out.sgfd_slope <= -0.75;

  RunConfig accel = plain;
  accel.schedule = StepsizeSchedule::robbins_monro(5.0, 150.0);
  // The accelerated run starts farther out so the contraction term still
  // dominates the fit window: its stochastic floor sits near gap ~ 0.02 at
  // k = 1e4 independently of the start, and fitting inside that floor would
  // measure the floor's own ~1/k decay instead of the accelerated rate.
  accel.x1 = offset_start(out.problem, 3.0);
  MomentumOptions options;
  options.decay = DecaySchedule::changing(2.0);
  const Trace momentum_trace = run_accelerated(out.problem, accel, options);
  out.momentum_slope = fit_trace_gap_rate(momentum_trace, 1000, 10000).slope;
  out.momentum_ok = out.momentum_slope >= -2.4 && out.momentum_slope <= -1.2 &&
                    out.momentum_slope <= out.sgfd_slope - 0.3;
  return out;
}

CheckResult sgfd_rate_check(const std::vector<SeedOutcome>& outcomes) {
  CheckResult r;
  r.threshold = 4.0;
  long passed = 0;
  std::ostringstream detail;
  detail << "slopes";
  for (const auto& o : outcomes) {
    passed += o.sgfd_ok ? 1 : 0;
    detail << " " << fmt(o.sgfd_slope) << (o.sgfd_ok ? "" : "(out)");
  }
  r.statistic = static_cast<double>(passed);
  r.pass = passed >= 4;
  detail << "; band [-1.35,-0.75]; window [1e3,1e4]; " << passed << "/"
         << outcomes.size() << " seeds in band";
  r.detail = detail.str();
  return r;
}

CheckResult momentum_rate_check(const std::vector<SeedOutcome>& outcomes) {
  CheckResult r;
  r.threshold = 4.0;
  long passed = 0;
  std::ostringstream detail;
  detail << "momentum vs plain slopes";
  for (const auto& o : outcomes) {
    passed += o.momentum_ok ? 1 : 0;
    detail << " (" << fmt(o.momentum_slope) << " vs " << fmt(o.sgfd_slope)
           << (o.momentum_ok ? ")" : ", out)");
  }
  r.statistic = static_cast<double>(passed);
  r.pass = passed >= 4;
  detail << "; band [-2.4,-1.2] and steeper by >= 0.3; " << passed << "/"
         << outcomes.size() << " seeds pass";
  r.detail = detail.str();
  return r;
}

// --------------------------------------------------- momentum variance decay

CheckResult variance_decay_check() {
  CheckResult r;
  r.threshold = 1.0;
  StreamSeeder seeder(4242);
  auto rng_con = seeder.stream(StreamSeeder::kConstructionReplication, 0);
  const auto problem =
      make_quadratic(spaced_eigenvalues(10, 10.0), 1.0, rng_con);

  RunConfig base;
  base.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  base.schedule = StepsizeSchedule::robbins_monro(5.0, 150.0);
  base.directions = DirectionDistribution{DirectionLaw::kUniformSymmetric, 10};
  base.iterations = 10000;
  base.replications = 100;
  base.seed = 4242;
  base.record_stride = 100;
  base.x1 = offset_start(problem, 0.3);

  std::ostringstream detail;
  int sub_passed = 0;
  for (double p : {1.0, 2.0}) {
    MomentumOptions options;
    options.decay = DecaySchedule::changing(p);
    options.frozen_trajectory = true;
    const Trace trace = run_accelerated(problem, base, options);
    std::vector<long> ks;
    std::vector<double> variances;
    for (const auto& row : trace.rows) {
      if (!row.var_direction) continue;
      ks.push_back(row.k);
      variances.push_back(*row.var_direction);
    }
    const double slope = fit_rate(ks, variances, 100, 10000).slope;
    const bool ok = slope >= -1.35 && slope <= -0.65;
    sub_passed += ok ? 1 : 0;
    detail << "p=" << fmt(p) << " slope " << fmt(slope)
           << (ok ? "" : " (outside [-1.35,-0.65])") << "; ";
  }

  MomentumOptions fixed;
  fixed.decay = DecaySchedule::fixed(0.9);
  fixed.frozen_trajectory = true;
  const Trace trace = run_accelerated(problem, base, fixed);
  double plateau = 0.0, v_bar = 0.0;
  long counted = 0;
  for (const auto& row : trace.rows) {
    if (row.k < base.iterations / 2) continue;
    if (!row.var_direction || !row.var_step_scaled) continue;
    plateau += *row.var_direction;
    v_bar += *row.var_step_scaled;
    ++counted;
  }
  plateau /= static_cast<double>(counted);
  v_bar /= static_cast<double>(counted);
  const double level = (1.0 - 0.9) / (1.0 + 0.9) * v_bar;
  const double ratio = plateau / level;
  const bool plateau_ok = ratio >= 0.5 && ratio <= 2.0;
  sub_passed += plateau_ok ? 1 : 0;
  detail << "fixed gamma=0.9 plateau/level " << fmt(ratio)
         << (plateau_ok ? "" : " (outside [0.5,2])")
         << " (plateau " << fmt(plateau) << ", (1-g)/(1+g)*Vbar "
         << fmt(level) << ", rows k>=K/2)";

  r.statistic = static_cast<double>(sub_passed) / 3.0;
  r.pass = sub_passed == 3;
  r.detail = detail.str();
  return r;
}

// ----------------------------------------------------------- bound machinery

CheckResult bound_oracle_check(long k_max) {
  CheckResult r;
  r.threshold = 1e-10;
  std::mt19937_64 rng(20260817ull);
  std::uniform_real_distribution<double> u_beta(0.2, 6.0);
  std::uniform_real_distribution<double> u_sigma(0.5, 200.0);
  std::uniform_real_distribution<double> u_l(0.05, 2.0);

  const std::vector<long> ks = {1, 2, 10, 100, 1000, 10000};
  double worst = 0.0;
  for (int set = 0; set < 20; ++set) {
    BoundParams params;
    do {
      params.beta = u_beta(rng);
      params.sigma = u_sigma(rng);
      params.l = u_l(rng);
      params.rate_divisor = 1 + static_cast<int>(rng() % 2);
      // Keep the contraction factors positive (every feasible schedule has
      // a = beta*l/div < 1 + sigma, since alpha_1 < 1/l).
    } while (params.rate_exponent() >= 0.95 * (1.0 + params.sigma));
    for (long k : ks) {
      if (k > k_max) continue;
      const double a_gamma = contraction_product(params, k);
      const double a_direct = contraction_product_direct(params, k);
      const double b_gamma = noise_accumulation(params, k);
      const double b_direct = noise_accumulation_direct(params, k);
      worst = std::max(worst, std::abs(a_gamma - a_direct) /
                                  std::max(std::abs(a_direct), 1e-30));
      worst = std::max(worst, std::abs(b_gamma - b_direct) /
                                  std::max(std::abs(b_direct), 1e-30));
    }
  }

  // Fixed stepsize: B_k approaches alpha/l.
  double worst_fixed = 0.0;
  for (const auto& [alpha, l] :
       std::vector<std::pair<double, double>>{{0.01, 0.5}, {0.003, 1.2},
                                              {0.05, 0.2}}) {
    const double got = fixed_step_noise_accumulation(alpha, l, 1000000);
    const double want = fixed_step_noise_limit(alpha, l);
    worst_fixed = std::max(worst_fixed, std::abs(got - want) / want);
  }

  // Inverse-square stepsizes: the contraction converges to
  // sin(pi sqrt(bl)) / (pi sqrt(bl)).
  double worst_euler = 0.0;
  for (double bl : {0.25, 0.5, 0.81}) {
    const double got = inverse_square_contraction(bl, 1000000);
    const double want = inverse_square_contraction_limit(bl);
    worst_euler = std::max(worst_euler, std::abs(got - want));
  }

  r.statistic = worst;
  r.pass = worst <= 1e-10 && worst_fixed <= 1e-6 && worst_euler <= 1e-3;
  r.detail = "gamma vs direct worst rel err " + fmt(worst) +
             " (20 parameter sets, k<=" + std::to_string(k_max) +
             ", need <=1e-10); fixed-step limit err " + fmt(worst_fixed) +
             " (need <=1e-6 at k=1e6); inverse-square limit err " +
             fmt(worst_euler) + " (need <=1e-3 at k=1e6)";
  return r;
}

// ----------------------------------------------------------- decay envelope

CheckResult envelope_check(const SeedOutcome& outcome) {
  CheckResult r;
  r.threshold = 0.95;
  const auto& problem = outcome.problem;
  const auto& trace = outcome.sgfd_trace;
  const DirectionDistribution dist{DirectionLaw::kUniformSymmetric, 10};
  const StepVariant variant{StepKind::kSingleSample, 1, 1};
  StreamSeeder seeder(outcome.seed);

  // Variance-model fit over a small probe grid (three points spanning
  // different gradient norms, three stepsizes).
  Vec mid(outcome.x1.size());
  add_scaled(outcome.x1, 1.0, *problem.constants.minimizer, mid);
  for (auto& v : mid) v *= 0.5;
  const std::vector<const Vec*> probes = {&outcome.x1, &mid,
                                          &*problem.constants.minimizer};
  const double a1 = 2.0 / 61.0;
  std::vector<double> grid_alpha, grid_grad, grid_var;
  long stream = 0;
  for (const Vec* probe : probes) {
    const double g_sq = norm_sq(problem.reference_gradient(*probe));
    for (double alpha : {a1, 0.5 * a1, 0.25 * a1}) {
      auto rng = seeder.stream(StreamSeeder::kProbeReplication, 100 + stream++);
      const auto moments =
          estimate_step_moments(problem, variant, dist, *probe, alpha, 4000, rng);
      grid_alpha.push_back(alpha);
      grid_grad.push_back(g_sq);
      grid_var.push_back(moments.variance);
    }
  }
  const auto fit = fit_variance_model(grid_alpha, grid_grad, grid_var);
  const auto dm = moment_constants(dist);
  const double m_d = step_noise_constant(fit.m_hat, 10, dm.d_zeta);

  BoundParams params{2.0, 60.0, *problem.constants.strong_convexity, 1};
  const double gap1 =
      trace.initial_objective - *problem.constants.optimal_value;
  const auto report = envelope_pass_fraction(
      trace, params, *problem.constants.smoothness, m_d, gap1);

  r.statistic = report.pass_fraction;
  r.pass = report.pass_fraction >= 0.95;
  r.detail = "envelope holds at " + fmt(100.0 * report.pass_fraction) +
             "% of " + std::to_string(report.checked) +
             " recorded iterations (need >=95%); M_hat " + fmt(fit.m_hat) +
             ", M_d " + fmt(m_d) + ", gap1 " + fmt(gap1);
  return r;
}

// ----------------------------------------------------------- nonconvex trend

CheckResult nonconvex_check() {
  CheckResult r;
  r.threshold = 4.0;
  long passed = 0;
  std::ostringstream detail;
  detail << "final running-min of E||grad F||^2:";
  for (std::uint64_t seed : kMasterSeeds) {
    const auto problem = make_rosenbrock_like(2);
    RunConfig config;
    config.variant = StepVariant{StepKind::kSingleSample, 1, 1};
    // Near the curved-valley minimizer the transverse curvature is ~1e3 and
    // squared direction components reach 3, so single-sample steps stay
    // stable only for alpha below ~6e-4; this schedule caps alpha_1 at 3e-4
    // while keeping enough total stepsize mass to traverse the valley.
    config.schedule = StepsizeSchedule::robbins_monro(30.0, 100000.0);
    config.directions =
        DirectionDistribution{DirectionLaw::kUniformSymmetric, 2};
    config.iterations = 100000;
    config.replications = 20;
    config.seed = seed;
    config.record_stride = 100;
    bool ok = false;
    double final_min = std::numeric_limits<double>::quiet_NaN();
    try {
      const Trace trace = run_sgfd(problem, config);
      double running = std::numeric_limits<double>::infinity();
      bool monotone = true;
      std::vector<double> runmin;
      for (const auto& row : trace.rows) {
        running = std::min(running, row.mean_grad_sq);
        runmin.push_back(running);
      }
      for (std::size_t i = 1; i < runmin.size(); ++i)
        monotone = monotone && runmin[i] <= runmin[i - 1];
      final_min = running;
      ok = monotone && final_min < 1e-2;
    } catch (const DivergenceError&) {
      ok = false;
    }
    passed += ok ? 1 : 0;
    detail << " " << fmt(final_min) << (ok ? "" : "(fail)");
  }
  r.statistic = static_cast<double>(passed);
  r.pass = passed >= 4;
  detail << "; need < 1e-2 with non-increasing running min; " << passed << "/5 seeds";
  r.detail = detail.str();
  return r;
}

// -------------------------------------------------------------- determinism

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentSpec determinism_spec(const std::string& out_dir) {
  ExperimentSpec spec;
  spec.output_dir = out_dir;

  CombinationSpec plain;
  plain.name = "criterion3-rerun";
  plain.problem_kind = "quadratic";
  plain.dimension = 10;
  plain.condition = 10.0;
  plain.noise_sd = 1.0;
  plain.optimizer = "sgfd";
  plain.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  plain.law = DirectionLaw::kUniformSymmetric;
  plain.schedule = StepsizeSchedule::robbins_monro(2.0, 60.0);
  plain.iterations = 10000;
  plain.replications = 50;
  plain.seed = kMasterSeeds[0];
  plain.stride = 10;
  plain.x1 = offset_start(build_problem(plain), 0.5);
  spec.combinations.push_back(plain);

  CombinationSpec frozen;
  frozen.name = "criterion5-rerun";
  frozen.problem_kind = "quadratic";
  frozen.dimension = 10;
  frozen.condition = 10.0;
  frozen.noise_sd = 1.0;
  frozen.optimizer = "momentum";
  frozen.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  frozen.law = DirectionLaw::kUniformSymmetric;
  frozen.schedule = StepsizeSchedule::robbins_monro(5.0, 150.0);
  frozen.iterations = 10000;
  frozen.replications = 100;
  frozen.seed = 4242;
  frozen.stride = 100;
  frozen.momentum.decay = DecaySchedule::changing(2.0);
  frozen.momentum.frozen_trajectory = true;
  frozen.x1 = offset_start(build_problem(frozen), 0.3);
  spec.combinations.push_back(frozen);
  return spec;
}

CheckResult determinism_check() {
  namespace fs = std::filesystem;
  CheckResult r;
  r.threshold = 0.0;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  const fs::path base =
      fs::temp_directory_path() / ("sgfd-verify-" + std::to_string(stamp));
  const fs::path dir_a = base / "a";
  const fs::path dir_b = base / "b";

  long differing = 0;
  std::ostringstream detail;
  try {
    const auto report_a = run_experiment(determinism_spec(dir_a.string()));
    const auto report_b = run_experiment(determinism_spec(dir_b.string()));
    long compared = 0;
    for (std::size_t i = 0; i < report_a.results.size(); ++i) {
      const auto& name = report_a.results[i].csv_name;
      if (name.empty() || report_b.results[i].csv_name.empty()) {
        ++differing;
        continue;
      }
      const std::string bytes_a = read_file_bytes(dir_a / name);
      const std::string bytes_b = read_file_bytes(dir_b / name);
      ++compared;
      if (bytes_a != bytes_b) {
        ++differing;
        detail << name << " differs; ";
      }
    }
    detail << compared
           << " CSVs byte-compared across two identical-seed reruns "
              "(plain and frozen-momentum combinations)";
  } catch (...) {
    fs::remove_all(base);
    throw;
  }
  fs::remove_all(base);

  r.statistic = static_cast<double>(differing);
  r.pass = differing == 0;
  r.detail = detail.str();
  return r;
}

}  // namespace

// ------------------------------------------------------- injectable checks

CheckResult check_unit_covariance(const DirectionSampler& sampler,
                                  int dimension, long n, std::uint64_t seed,
                                  double tolerance, const std::string& label) {
  CheckResult r;
  r.id = "unit-covariance";
  r.name = "unit covariance (" + label + ")";
  r.threshold = tolerance;
  const int d = dimension;
  std::mt19937_64 rng = StreamSeeder(seed).stream(0, 0);
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  std::vector<double> second(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> z(static_cast<std::size_t>(d));
  for (long i = 0; i < n; ++i) {
    sampler(rng, z);
    for (int a = 0; a < d; ++a) {
      mean[a] += z[a];
      for (int b = a; b < d; ++b)
        second[static_cast<std::size_t>(a) * d + b] += z[a] * z[b];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : mean) v *= inv_n;
  double worst = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      const double cov =
          second[static_cast<std::size_t>(a) * d + b] * inv_n - mean[a] * mean[b];
      worst = std::max(worst, std::abs(cov - (a == b ? 1.0 : 0.0)));
    }
  r.statistic = worst;
  r.pass = worst <= tolerance;
  r.detail = "max |cov - identity| entry " + fmt(worst) + " over n=" +
             std::to_string(n) + " draws, d=" + std::to_string(d) +
             " (need <= " + fmt(tolerance) + ")";
  return r;
}

CheckResult check_constant_input_weights(const MomentumUpdater& update,
                                         int dimension, long iterations,
                                         const std::string& label) {
  CheckResult r;
  r.id = "weight-normalization";
  r.name = "constant-input weight normalization (" + label + ")";
  r.threshold = 1e-12;
  Vec u(static_cast<std::size_t>(dimension));
  for (int i = 0; i < dimension; ++i) u[static_cast<std::size_t>(i)] = 0.5 + i;
  double worst = 0.0;
  for (long k = 1; k <= iterations; ++k) {
    const double alpha = 1.0 / static_cast<double>(k);
    Vec step(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) step[i] = alpha * u[i];
    const Vec m = update(step, alpha);
    for (std::size_t i = 0; i < u.size(); ++i)
      worst = std::max(worst, std::abs(m[i] - u[i]));
  }
  r.statistic = worst;
  r.pass = worst <= r.threshold;
  r.detail = "max |m_k - u| over " + std::to_string(iterations) +
             " iterations with constant input u: " + fmt(worst) +
             " (a normalized weighted average reproduces u exactly)";
  return r;
}

// ---------------------------------------------------------------- the suites

std::vector<CheckResult> run_fast_suite(
    const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;

  emit(out, on_result,
       guarded("fast-directions", "direction-law moments (reduced n)", [] {
         // Reconstruction bound loosened to 0.03: its mean value at n=1e5 is
         // ~0.009*sqrt(d), so the acceptance bound 0.01 only applies at n=1e6.
         return direction_law_check({2, 8}, 100000, 0.03);
       }));

  emit(out, on_result,
       guarded("fast-unbiasedness", "step-bias scaling (reduced n)",
               [] { return unbiasedness_check(100000); }));

  emit(out, on_result, guarded("fast-bounds", "bound oracles (k<=1e3)",
                               [] { return bound_oracle_check(1000); }));

  for (const DirectionLaw law :
       {DirectionLaw::kUniformSymmetric, DirectionLaw::kStandardNormal}) {
    const char* label =
        law == DirectionLaw::kUniformSymmetric ? "uniform" : "normal";
    const DirectionDistribution dist{law, 8};
    auto sampler = [dist](std::mt19937_64& rng, std::span<double> z) {
      sample_into(dist, rng, z);
    };
    CheckResult r =
        check_unit_covariance(sampler, 8, 100000, 0xC0Cull, 0.02, label);
    r.id = std::string("fast-covariance-") + label;
    emit(out, on_result, std::move(r));
  }

  {
    auto state = std::make_shared<MomentumState>(4, DecaySchedule::changing(2.0));
    auto updater = [state](const Vec& step, double alpha) {
      return state->update(step, alpha);
    };
    CheckResult r = check_constant_input_weights(updater, 4, 200, "changing p=2");
    r.id = "fast-weights";
    emit(out, on_result, std::move(r));
  }

  emit(out, on_result,
       guarded("fast-determinism", "trace determinism (small run)", [] {
         CheckResult r;
         r.threshold = 0.0;
         StreamSeeder seeder(77);
         auto rng_con = seeder.stream(StreamSeeder::kConstructionReplication, 0);
         const auto problem =
             make_quadratic(spaced_eigenvalues(4, 5.0), 0.5, rng_con);
         RunConfig config;
         config.variant = StepVariant{StepKind::kSingleSample, 1, 1};
         config.schedule = StepsizeSchedule::robbins_monro(2.0, 30.0);
         config.directions =
             DirectionDistribution{DirectionLaw::kUniformSymmetric, 4};
         config.iterations = 400;
         config.replications = 3;
         config.seed = 77;
         config.record_stride = 10;
         const std::string csv_a = format_trace_csv(run_sgfd(problem, config));
         const std::string csv_b = format_trace_csv(run_sgfd(problem, config));
         r.statistic = csv_a == csv_b ? 0.0 : 1.0;
         r.pass = csv_a == csv_b;
         r.detail = "two identical-seed runs render identical CSV text (" +
                    std::to_string(csv_a.size()) + " bytes)";
         return r;
       }));

  return out;
}

std::vector<CheckResult> run_acceptance_suite(
    const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;

  emit(out, on_result,
       guarded("1", "direction-laws",
               [] { return direction_law_check({2, 8, 32}, 1000000, 0.01); }));

  emit(out, on_result, guarded("2", "asymptotic-unbiasedness",
                               [] { return unbiasedness_check(1000000); }));

  std::vector<SeedOutcome> outcomes;
  bool rate_runs_ok = true;
  std::string rate_error;
  try {
    for (std::uint64_t seed : kMasterSeeds) outcomes.push_back(run_rate_pair(seed));
  } catch (const std::exception& e) {
    rate_runs_ok = false;
    rate_error = e.what();
  }

  auto rate_guard = [&](const char* id, const char* name,
                        const std::function<CheckResult()>& body) {
    if (!rate_runs_ok) {
      CheckResult r;
      r.id = id;
      r.name = name;
      r.pass = false;
      r.detail = "rate runs failed: " + rate_error;
      return r;
    }
    return guarded(id, name, body);
  };

  emit(out, on_result, rate_guard("3", "sgfd-rate", [&] {
         return sgfd_rate_check(outcomes);
       }));
  emit(out, on_result, rate_guard("4", "momentum-rate", [&] {
         return momentum_rate_check(outcomes);
       }));
  emit(out, on_result, guarded("5", "momentum-variance-decay",
                               [] { return variance_decay_check(); }));
  emit(out, on_result, guarded("6", "bound-oracles",
                               [] { return bound_oracle_check(10000); }));
  emit(out, on_result, rate_guard("7", "decay-envelope", [&] {
         return envelope_check(outcomes.front());
       }));
  emit(out, on_result,
       guarded("8", "nonconvex-trend", [] { return nonconvex_check(); }));
  emit(out, on_result,
       guarded("9", "determinism", [] { return determinism_check(); }));

  return out;
}

std::vector<CheckResult> run_verification(
    VerifyLevel level,
    const std::function<void(const CheckResult&)>& on_result) {
  return level == VerifyLevel::kFast ? run_fast_suite(on_result)
                                     : run_acceptance_suite(on_result);
}

}  // namespace sgfd
