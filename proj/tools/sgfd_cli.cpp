#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgfd/analysis.hpp"
#include "sgfd/experiment.hpp"
#include "sgfd/trace_io.hpp"
#include "sgfd/verify.hpp"

namespace {

void print_check(const sgfd::CheckResult& r) {
  std::printf("[%s] %s %s: %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(),
              r.name.c_str(), r.detail.c_str());
  std::fflush(stdout);
}

int cmd_run(const std::string& spec_path) {
  const auto spec = sgfd::parse_experiment_file(spec_path);
  const auto report = sgfd::run_experiment(spec);
  for (const auto& result : report.results) {
    if (result.diverged) {
      std::printf("%-24s DIVERGED at iteration %ld (replication %d)\n",
                  result.name.c_str(), result.divergence_iteration,
                  result.divergence_replication);
      continue;
    }
    std::printf("%-24s ok  csv=%s", result.name.c_str(),
                result.csv_name.c_str());
    if (result.rate)
      std::printf("  slope=%.4g (window %ld..%ld)", result.rate->slope,
                  result.rate_window.first, result.rate_window.second);
    if (result.envelope)
      std::printf("  envelope=%.1f%%", 100.0 * result.envelope->pass_fraction);
    std::printf("  %.2fs\n", result.wall_clock_sec);
  }
  std::printf("report: %s/report.json (%zu combinations, %.2fs)\n",
              report.output_dir.c_str(), report.results.size(),
              report.wall_clock_sec);
  return 0;
}

int cmd_verify(bool full) {
  const auto results = sgfd::run_verification(
      full ? sgfd::VerifyLevel::kFull : sgfd::VerifyLevel::kFast, print_check);
  long failures = 0;
  for (const auto& r : results) failures += r.pass ? 0 : 1;
  std::printf("%zu checks, %ld failed (%s suite)\n", results.size(), failures,
              full ? "full" : "fast");
  return failures == 0 ? 0 : 2;
}

int cmd_rates(const std::string& csv_path, const std::string& window) {
  const auto table = sgfd::parse_trace_csv_file(csv_path);
  if (table.rows() == 0) throw std::runtime_error("trace has no rows");
  long k_hi = *std::max_element(table.k.begin(), table.k.end());
  long k_lo = std::max<long>(1, k_hi / 10);
  if (!window.empty()) {
    const auto colon = window.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("--window expects k_lo:k_hi");
    k_lo = std::stol(window.substr(0, colon));
    k_hi = std::stol(window.substr(colon + 1));
  }
  const auto fit = sgfd::fit_rate(table.k, table.mean_gap, k_lo, k_hi);
  std::printf("window [%ld, %ld]: slope %.6g, intercept %.6g, residual RMS "
              "%.3g, %ld points used, %ld dropped\n",
              k_lo, k_hi, fit.slope, fit.intercept, fit.residual_rms,
              fit.points_used, fit.points_dropped);
  return 0;
}

int cmd_bounds(double beta, double sigma, double l, long k, bool momentum) {
  sgfd::BoundParams params{beta, sigma, l, momentum ? 2 : 1};
  sgfd::check_bound_params(params);
  const double a = params.rate_exponent();
  const double bound_a = sgfd::contraction_product(params, k);
  const double bound_b = sgfd::noise_accumulation(params, k);
  std::printf("a = beta*l/divisor = %.6g\n", a);
  std::printf("A_%ld = %.12g (A_k * k^a = %.6g, limit %.6g)\n", k, bound_a,
              bound_a * std::pow(static_cast<double>(k), a),
              sgfd::contraction_asymptote(params));
  std::printf("B_%ld = %.12g", k, bound_b);
  if (a > 1.0)
    std::printf(" (B_k * (k+1+sigma) = %.6g, limit beta^2/(a-1) = %.6g)",
                bound_b * (static_cast<double>(k) + 1.0 + sigma),
                sgfd::noise_asymptote_coefficient(params));
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-free stochastic descent: experiments, rate fits, "
               "decay bounds, verification"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run an experiment spec file");
  std::string spec_path;
  run_cmd->add_option("spec", spec_path, "experiment spec file")->required();

  auto* verify_cmd =
      app.add_subcommand("verify", "Run the verification suites");
  bool full = false, fast = false;
  verify_cmd->add_flag("--full", full, "full acceptance experiments");
  verify_cmd->add_flag("--fast", fast, "reduced-sample spot checks (default)");

  auto* rates_cmd =
      app.add_subcommand("rates", "Fit a log-log rate to a trace CSV");
  std::string csv_path, window;
  rates_cmd->add_option("trace", csv_path, "trace CSV file")->required();
  rates_cmd->add_option("--window", window, "fit window k_lo:k_hi");

  auto* bounds_cmd =
      app.add_subcommand("bounds", "Evaluate the decay-bound constants");
  double beta = 0, sigma = 0, l = 0;
  long k = 0;
  bool momentum = false;
  bounds_cmd->add_option("--beta", beta)->required();
  bounds_cmd->add_option("--sigma", sigma)->required();
  bounds_cmd->add_option("--l", l)->required();
  bounds_cmd->add_option("--k", k)->required();
  bounds_cmd->add_flag("--momentum", momentum,
                       "use the momentum contraction (l/2)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run_cmd)) return cmd_run(spec_path);
    if (app.got_subcommand(verify_cmd)) {
      if (full && fast)
        throw std::invalid_argument("choose one of --fast / --full");
      return cmd_verify(full);
    }
    if (app.got_subcommand(rates_cmd)) return cmd_rates(csv_path, window);
    if (app.got_subcommand(bounds_cmd))
      return cmd_bounds(beta, sigma, l, k, momentum);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
