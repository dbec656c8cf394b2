#pragma once

#include "berknash/model.hpp"

namespace berknash {

/// Transition law on feasible pairs induced by a strategy: the chance of
/// moving from pair (s, x) to (s', x') is sigma(x'|s') * Q(s'|s, x). Kept in
/// factorized form; apply() and dense() realize products on demand.
class OutcomeKernel {
 public:
  OutcomeKernel(const FiniteMdp& mdp, Strategy sigma,
                const Matrix* kernel = nullptr);

  /// Distribution after one step: out(p') = sigma(p') * sum_p m(p) Q(s'|p).
  Vector apply(const Vector& m) const;

  /// Entry ((s,x) -> (s',x')).
  double entry(int from_pair, int to_pair) const;

  /// Materialized |Gr| x |Gr| matrix; intended for small models and tests.
  Matrix dense() const;

  /// State-level chain P(s'|s) = sum_x sigma(x|s) Q(s'|s,x).
  const Matrix& state_chain() const { return state_chain_; }
  const Strategy& strategy() const { return sigma_; }

 private:
  const FiniteMdp* mdp_;
  const Matrix* kernel_;
  Strategy sigma_;
  Matrix state_chain_;
};

/// The stationary outcome distributions of an outcome kernel form a convex
/// polytope; this reports one extreme point per closed communicating class
/// (the polytope is their convex hull). Outcomes outside every closed class
/// receive exactly zero mass in every extreme.
struct StationarySet {
  std::vector<OutcomeDistribution> extremes;
  /// State indices of each closed communicating class, aligned with
  /// extremes.
  std::vector<std::vector<int>> recurrent_classes;
  /// States outside every closed class.
  std::vector<int> transient_states;
};

StationarySet stationary_set(const FiniteMdp& mdp, const Strategy& sigma,
                             const Matrix* kernel = nullptr);

/// Strong connectivity of the state digraph with an edge s -> s' whenever
/// some feasible action moves s to s' with positive probability.
bool full_communication(const FiniteMdp& mdp, const Matrix* kernel = nullptr);

/// True when every feasible pair has strictly positive mass.
bool support_is_full(const OutcomeDistribution& m);

/// Strongly connected components of an adjacency structure, in reverse
/// topological order of the component DAG. Exposed for reuse.
std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adjacency);

}  // namespace berknash
