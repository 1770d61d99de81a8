#pragma once

#include <optional>

#include "sgfd/runner.hpp"

namespace sgfd {

enum class DecayKind {
  kChanging,  // gamma(k) = (k/(k+1))^p : vanishing discount, averaging window
              // grows with k and the direction variance decays like 1/k
  kFixed,     // gamma(k) = gamma : geometric window, variance plateaus at
              // (1-gamma)/(1+gamma) times the per-step level
};

struct DecaySchedule {
  DecayKind kind = DecayKind::kChanging;
  double p = 2.0;
  double gamma = 0.9;

  static DecaySchedule changing(double p);   // p > 0
  static DecaySchedule fixed(double gamma);  // 0 < gamma < 1

  double factor(long k) const;  // gamma(k), k >= 1
};

// Telescoped product prod_{l=j..k} (l/(l+1))^p = (j/(k+1))^p for the
// changing decay; exposed for tests of the weight algebra.
double changing_decay_product(long j, long k, double p);

// Momentum direction state. The direction returned after step k is the
// convex combination
//   m_k = sum_{j<=k} w_j (s_j / alpha_j) / sum_{j<=k} w_j ,
// with w_j = j^p (changing decay) or w_j = gamma^{k-j} (fixed decay).
// Equivalent discounted-accumulator form: v_k = gamma(k) (v_{k-1} +
// s_k/alpha_k) normalized by W_k = sum_{i<=k} prod_{l=i..k} gamma(l); the
// running sums below carry the common gamma products cancelled out, which
// keeps the first update m_1 = s_1/alpha_1 bit-exact.
class MomentumState {
 public:
  MomentumState(int dimension, DecaySchedule decay);

  // Feed the step s_k taken with stepsize alpha_k; returns m_k.
  const Vec& update(const Vec& step, double alpha);

  const Vec& direction() const { return direction_; }
  long iteration() const { return k_; }

  // Discounted accumulator v_k and its normalizer W_k (diagnostics/tests).
  Vec accumulator() const;
  double normalizer() const;

  // Raw weight sums: sum_j w_j and sum_j w_j^2. Their ratio
  // sum w^2 / (sum w)^2 controls the variance contraction of m_k.
  double total_weight() const { return total_weight_; }
  double weight_ratio() const;

 private:
  DecaySchedule decay_;
  long k_ = 0;
  Vec weighted_sum_;  // sum_j w_j s_j/alpha_j
  double total_weight_ = 0.0;
  double total_weight_sq_ = 0.0;
  Vec direction_;
};

struct MomentumOptions {
  DecaySchedule decay;
  // Optional projection of the iterate onto a ball of this radius around x1
  // (off by default).
  std::optional<double> clip_radius;
  // Diagnostic mode: a pilot trajectory is generated once (dedicated seed
  // stream), then every replication replays the *same* iterates and only the
  // per-iteration randomness (xi, zeta) is resampled. Isolates the variance
  // of m_k from trajectory noise.
  bool frozen_trajectory = false;
};

// Accelerated run: x_{k+1} = x_k + alpha_k m_k. The first iteration is
// identical to plain gradient-free descent under shared seeds. Traces carry
// the per-k variance of m_k across replications (var_direction) and, in
// frozen mode, the variance of s_k/alpha_k (var_step_scaled).
Trace run_accelerated(const StochasticProblem& problem,
                      const RunConfig& config, const MomentumOptions& options);

}  // namespace sgfd
