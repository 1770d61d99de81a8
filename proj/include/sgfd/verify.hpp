#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgfd/directions.hpp"
#include "sgfd/vec.hpp"

namespace sgfd {

// One named invariant with its measured statistic and the threshold it was
// held against. `statistic` and `threshold` are oriented so that pass means
// "statistic within threshold" in the sense given by `detail`.
struct CheckResult {
  std::string id;
  std::string name;
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string detail;
};

enum class VerifyLevel { kFast, kFull };

// Fast: sub-minute Monte-Carlo spot checks at reduced sample counts, plus
// the exact invariants (bound oracles, weight normalization, determinism).
std::vector<CheckResult> run_fast_suite(
    const std::function<void(const CheckResult&)>& on_result = {});

// Full: the nine acceptance experiments, ids "1" through "9", with the
// sample counts, tolerance bands, and seed counts pinned in verify.cpp.
std::vector<CheckResult> run_acceptance_suite(
    const std::function<void(const CheckResult&)>& on_result = {});

std::vector<CheckResult> run_verification(
    VerifyLevel level,
    const std::function<void(const CheckResult&)>& on_result = {});

// ---- injectable checks (mutation-testable components) ----

// Fills a span with one direction draw; the real implementation is
// sample_into. Mutations (e.g. scaling draws) must trip the checks below.
using DirectionSampler =
    std::function<void(std::mt19937_64&, std::span<double>)>;

// Empirical covariance of n draws must match the identity entrywise within
// `tolerance`.
CheckResult check_unit_covariance(const DirectionSampler& sampler,
                                  int dimension, long n, std::uint64_t seed,
                                  double tolerance, const std::string& label);

// Stateful momentum update: feed (step, alpha), get the current direction.
// With constant input u (steps alpha_k * u), a correctly normalized average
// returns exactly u at every iteration.
using MomentumUpdater = std::function<Vec(const Vec& step, double alpha)>;
CheckResult check_constant_input_weights(const MomentumUpdater& update,
                                         int dimension, long iterations,
                                         const std::string& label);

}  // namespace sgfd
