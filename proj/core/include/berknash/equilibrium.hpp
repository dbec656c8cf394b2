#pragma once

#include <string>
#include <utility>
#include <vector>

#include "berknash/model.hpp"

namespace berknash {

/// Tolerances and conventions used when checking a candidate equilibrium.
/// epsilon > 0 verifies against an epsilon-floored strategy set: actions at
/// the floor are exempt from the optimality check.
struct VerifyOptions {
  double tol_optimality = 1e-7;
  double tol_belief = 1e-7;
  double tol_stationarity = 1e-9;
  double opt_tol = kOptTol;
  double wkld_tol = kWkldTol;
  double epsilon = 0.0;
};

/// A candidate triple with its three defect measures:
///  - residual_optimality: worst payoff shortfall of an above-floor action
///    against the best response under the belief-mixed kernel;
///  - residual_belief: belief mass lying outside the divergence-minimizing
///    parameter set of m;
///  - residual_stationarity: sup-norm defect of m as a fixed point of the
///    induced outcome kernel.
struct EquilibriumCertificate {
  Strategy sigma;
  OutcomeDistribution m;
  Belief mu;
  double residual_optimality = kDivergenceInfinity;
  double residual_belief = kDivergenceInfinity;
  double residual_stationarity = kDivergenceInfinity;
  bool exhaustive_learning = false;
  double epsilon = 0.0;
  VerifyOptions tolerances;

  bool accepted() const {
    return residual_optimality <= tolerances.tol_optimality &&
           residual_belief <= tolerances.tol_belief &&
           residual_stationarity <= tolerances.tol_stationarity;
  }
};

/// Measures the candidate triple and reports a certificate. Never throws on
/// value-level defects; those show up as large residuals.
EquilibriumCertificate verify(const FiniteSmdp& smdp, const Strategy& sigma,
                              const OutcomeDistribution& m, const Belief& mu,
                              const VerifyOptions& opts = {});

/// One application of the equilibrium correspondence with smoothed strategy
/// selection: sigma' is the temperature-softmax over action values under the
/// mu-mixed kernel (temperature 0 means uniform over the near-optimal set),
/// m' the stationary extreme of the input sigma closest to the input m, and
/// mu' the input belief renormalized onto the divergence minimizers of the
/// input m (uniform there when the overlap is negligible).
struct BestResponse {
  Strategy sigma;
  OutcomeDistribution m;
  Belief mu;
};
BestResponse best_response_map(const FiniteSmdp& smdp, const Strategy& sigma,
                               const OutcomeDistribution& m, const Belief& mu,
                               double temperature);

/// True when no subjectively possible observation can move the belief: over
/// the support of mu, the parameter kernels agree (spread at most tol) on
/// every transition the mixture assigns more than tol probability.
/// Equivalent to mu being a fixed point of the Bayes operator at all such
/// transitions. Weights at or below 1e-12 are treated as outside the
/// support.
bool exhaustive_learning_check(const FiniteSmdp& smdp, const Belief& mu,
                               double tol = 1e-9);

/// A warm start for the equilibrium search; m may be empty (size 0), in
/// which case a stationary extreme of sigma is used.
struct StartPoint {
  Strategy sigma;
  Belief mu;
  OutcomeDistribution m;
};

struct FindConfig {
  int restarts = 16;
  bool pure_starts = true;
  /// Pure-strategy starts are enumerated only when the number of pure
  /// profiles is at most this cap.
  int max_pure_starts = 256;
  /// At most this many pure profiles are also run through the damped
  /// iteration; the rest are tested directly as candidate equilibria.
  int max_pure_iterated = 32;
  double damping = 0.25;
  double temp_start = 0.5;
  double temp_decay = 0.9;
  double temp_min = 1e-9;
  /// Iterations at the final temperature before the damping cooldown.
  int settle_iters = 300;
  /// Geometric damping decay during cooldown; shrinks the residual
  /// oscillation of interior mixed strategies. The final one-sided offset
  /// of the iterate is about damping_floor / (1 - cooldown_decay).
  double cooldown_decay = 0.93;
  double damping_floor = 1e-6;
  int max_iters = 2000;
  double iterate_tol = 1e-10;
  double dedup_tol = 1e-4;
  /// Strategy floor; positive values search the floored strategy set.
  double epsilon = 0.0;
  uint64_t seed = 0;  // 0 derives a seed from the instance itself
  int threads = 1;
  VerifyOptions tolerances;
  std::vector<StartPoint> extra_starts;
};

/// Damped, temperature-annealed iteration of the equilibrium correspondence
/// from many starting triples. Returns accepted certificates only,
/// deduplicated on (sigma, m); an empty result does not disprove existence.
std::vector<EquilibriumCertificate> find_equilibria(const FiniteSmdp& smdp,
                                                    const FindConfig& config = {});

/// Equilibria of the epsilon-floored strategy set. Throws when epsilon
/// exceeds 1/(|X|+1).
std::vector<EquilibriumCertificate> perturbed_equilibria(
    const FiniteSmdp& smdp, double epsilon, const FindConfig& config = {});

struct PerfectConfig {
  FindConfig find;
  std::vector<double> ladder = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3,
                                3e-4, 1e-4, 3e-5, 1e-5, 1e-6};
  /// A floor-parameter chain is accepted as convergent when its last two
  /// rungs differ by less than this in sup norm on (sigma, m).
  double chain_tol = 1e-4;
  /// Random restarts used on rungs after the first.
  int continuation_restarts = 2;
};

/// Robustness refinement: tracks equilibria down a ladder of strategy
/// floors, linking each rung's certificates to the nearest certificate one
/// rung above, and extrapolates convergent chains to a zero floor. The
/// extrapolated triple must re-verify at the unperturbed tolerances to be
/// returned. Hypothesis violations (no full communication, ambiguous
/// identification) are reported through `warnings` and do not stop the run.
std::vector<EquilibriumCertificate> perfect_equilibria(
    const FiniteSmdp& smdp, const PerfectConfig& config = {},
    std::vector<std::string>* warnings = nullptr);

/// Discount threshold below which myopic and dynamically optimal behavior
/// coincide. delta_hat is the smallest margin, over states and beliefs, by
/// which the best myopic action beats the runner-up; the threshold is
/// (delta_hat/M) / (2 + delta_hat/M) with M the payoff bound, clamped to 1
/// when every state has a single feasible action.
struct DeltaBarResult {
  double delta_bar = 0.0;
  double delta_hat = 0.0;
  double payoff_bound = 0.0;
  /// True when the belief infimum was resolved exactly (constant strict
  /// myopic argmax across vertices makes the margin concave, so the vertex
  /// minimum is the infimum; any argmax change or vertex tie forces 0).
  bool exact = false;
  std::string note = "conservative estimate";
};
DeltaBarResult delta_bar(const FiniteSmdp& smdp, int belief_samples = 200,
                         uint64_t seed = 0);

/// Exact projection onto the floored strategy set: actions that would fall
/// below the floor are pinned there and the remainder is split
/// proportionally. Throws when the floor is infeasible for some state.
Strategy clip_to_floor(const FiniteMdp& mdp, Strategy sigma, double epsilon);

}  // namespace berknash
