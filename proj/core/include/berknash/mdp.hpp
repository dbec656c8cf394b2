#pragma once

#include "berknash/model.hpp"

namespace berknash {

/// Optimal value function of a finite MDP together with convergence
/// diagnostics. Satisfies |values(s)| <= max|payoff| / (1 - discount).
struct ValueFunction {
  Vector values;
  long sweeps = 0;
  /// Sup-norm change of the final sweep.
  double residual = 0.0;
};

struct SolveOptions {
  /// Guarantees ||V - V*||_inf <= tol via the stopping rule
  /// sup-change <= tol * (1 - discount) / (2 * discount).
  double tol = 1e-10;
  long max_sweeps = 2000000;
  /// Alternative transition kernel on the same feasible pairs (e.g. a
  /// mixture model); payoffs, feasibility and discount come from the MDP.
  const Matrix* kernel = nullptr;
  /// Starting values (defaults to zero).
  const Vector* warm_start = nullptr;
};

/// Jacobi-style value iteration. A zero discount performs exactly one sweep.
ValueFunction value_iteration(const FiniteMdp& mdp, const SolveOptions& opts = {});

/// One-step action values at every feasible pair given continuation values v.
Vector q_values(const FiniteMdp& mdp, const Vector& v,
                const Matrix* kernel = nullptr);

/// Per-state sets of actions within tol of the best action value, sorted by
/// action index.
struct OptimalActionSets {
  std::vector<std::vector<int>> actions;
  double tol = kOptTol;
};

OptimalActionSets optimal_action_sets(const FiniteMdp& mdp, const Vector& q,
                                      double tol = kOptTol);

struct OptimalityCheck {
  bool optimal = false;
  /// Largest action-value shortfall over actions the strategy plays.
  double worst_shortfall = 0.0;
};

/// Checks that every action played by sigma attains the per-state best
/// action value within tol.
OptimalityCheck is_optimal(const FiniteMdp& mdp, const Strategy& sigma,
                           double tol = kOptTol,
                           const Matrix* kernel = nullptr,
                           const Vector* q = nullptr);

/// Exact discounted value of a fixed strategy (direct linear solve).
Vector policy_evaluation(const FiniteMdp& mdp, const Strategy& sigma,
                         const Matrix* kernel = nullptr);

}  // namespace berknash
