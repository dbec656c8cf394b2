#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "berknash/equilibrium.hpp"
#include "berknash/model.hpp"

namespace berknash {

/// Finite surrogate for the belief simplex. Either a regular barycentric
/// lattice of a given resolution, or an explicit point list for families
/// with two parameter atoms (where the simplex is a segment and linear
/// interpolation between consecutive points is exact for piecewise-linear
/// values with kinks on the grid).
class BeliefGrid {
 public:
  /// Empty grid; fill via regular() or from_points().
  BeliefGrid() = default;

  /// All lattice beliefs with weights in {0, 1/r, ..., 1}. Throws when the
  /// point count would exceed 1e6.
  static BeliefGrid regular(int n_params, int resolution);

  /// Explicit grid; restricted to two-atom families. Points are sorted by
  /// the weight of the first atom and must be distinct.
  static BeliefGrid from_points(std::vector<Belief> points);

  const std::vector<Belief>& points() const { return points_; }
  int n_points() const { return static_cast<int>(points_.size()); }
  int n_params() const { return n_params_; }
  /// 0 for explicit grids.
  int resolution() const { return resolution_; }

  /// Convex weights over grid points combining to mu. Exact at grid points
  /// and affine on each lattice simplex (segment for explicit grids).
  std::vector<std::pair<int, double>> locate(const Belief& mu) const;

 private:
  std::vector<Belief> points_;
  int n_params_ = 0;
  int resolution_ = 0;
  /// Occupancy-count lookup for lattice grids, built at construction so
  /// locate() is safe to call concurrently.
  std::map<std::vector<int>, int> index_;
};

/// Posterior after observing the transition (s, x) -> s_next: weights
/// proportional to Q_theta(s_next | s, x) * mu(theta). Throws runtime_error
/// "zero-likelihood observation" when the predictive probability of the
/// observation is at most 1e-300.
Belief bayes_update(const FiniteSmdp& smdp, const Belief& mu, int s, int x,
                    int s_next);

/// Value function of the belief-augmented dynamic program on S x grid.
struct BeliefValue {
  BeliefGrid grid;
  /// n_states x n_points.
  Matrix values;
  int sweeps = 0;
  double residual = 0.0;
};

/// Solves the belief-augmented Bellman equation by synchronous value
/// iteration; posteriors off the grid are folded back with the grid's
/// interpolation rule.
BeliefValue solve_belief_mdp(const FiniteSmdp& smdp, const BeliefGrid& grid,
                             double tol = 1e-10, int threads = 1);

/// Expected continuation value of (s, x) under belief mu when future play
/// updates beliefs, minus the same expectation when the belief stays frozen
/// at mu. Positive values reward experimentation.
double value_of_experimentation(const FiniteSmdp& smdp, const BeliefValue& W,
                                int s, int x, const Belief& mu);

enum class PolicyMode {
  /// Time-invariant policy from the belief-augmented program.
  kBeliefOptimal,
  /// Re-solves the fixed-belief MDP each period; ties break to the lowest
  /// action index.
  kCertaintyEquivalent,
  /// Maximizes the one-period expected payoff.
  kMyopic,
};

struct TraceRecord {
  int64_t t = 0;
  int state = 0;
  int action = 0;
  Strategy sigma;
  /// Empirical pair frequency over periods 0..t, normalized to sum 1.
  OutcomeDistribution m;
  Belief mu;
};

struct LearningTrace {
  /// Visited state and chosen action for every period.
  std::vector<int> states;
  std::vector<int> actions;
  /// Strategy, empirical frequency, and belief records. Dense traces store
  /// one record per period; long traces store geometric checkpoints plus a
  /// tail window.
  std::vector<TraceRecord> records;
  bool dense = true;
  int64_t periods = 0;
  bool zero_likelihood = false;
  uint64_t seed = 0;
  PolicyMode policy = PolicyMode::kCertaintyEquivalent;
  Belief prior;
  Belief final_belief;

  /// The stored record at period t, or nullptr when not retained.
  const TraceRecord* record_at(int64_t t) const;
};

struct SimulateOptions {
  /// Belief grid for the belief-optimal mode; nullptr builds a regular grid
  /// (resolution 100 for two atoms, coarser in higher dimension).
  const BeliefGrid* grid = nullptr;
  double value_tol = 1e-10;
  /// Per-period records are kept when (horizon+1) * record width stays
  /// within this many doubles; otherwise checkpoints plus a tail.
  int64_t dense_budget = 20000000;
  int tail_records = 4096;
};

/// Runs one learning trajectory: states follow the objective kernel,
/// actions follow the chosen policy at the current belief, and beliefs
/// follow Bayes updates. The posterior is carried as cumulative log-weights,
/// so a long unlucky stretch cannot round a parameter's mass to zero for
/// good; only an outcome the parameter gives probability zero does that.
/// Deterministic for a fixed seed. A zero-likelihood observation ends the
/// trace early and sets the flag. The prior must have full support.
LearningTrace simulate(const FiniteSmdp& smdp, const Belief& prior,
                       PolicyMode policy, int64_t horizon, uint64_t seed,
                       const SimulateOptions& options = {});

enum class StabilityVerdict { kStable, kUndetermined };

struct StabilityResult {
  StabilityVerdict verdict = StabilityVerdict::kUndetermined;
  /// Window average of the recorded strategies.
  Strategy sigma;
  /// Stationary extreme of sigma nearest to the final empirical frequency;
  /// the limit the empirical frequency converges to when stable.
  OutcomeDistribution m;
  /// Final recorded empirical frequency, for reference.
  OutcomeDistribution m_empirical;
  /// Window average of the recorded beliefs, normalized.
  Belief mu;
  bool exhaustive = false;
  double sigma_oscillation = 0.0;
  double m_oscillation = 0.0;
};

/// Stable when both the strategy and the empirical frequency move by at
/// most tol (sup norm) across the last `window` stored records. The
/// exhaustive flag reports exhaustive_learning_check at the window-average
/// belief.
StabilityResult detect_stability(const FiniteSmdp& smdp,
                                 const LearningTrace& trace, int window,
                                 double tol);

struct ConcentrationPoint {
  int64_t t = 0;
  /// Belief mass on parameter atoms within eta of the minimizer set.
  double mass_near_minimizers = 0.0;
  double min_divergence = 0.0;
  int n_minimizers = 0;
};

/// Posterior-concentration diagnostic at geometric checkpoints
/// t in {100, 1000, ...} plus the last recorded period: the belief mass near
/// the divergence minimizers of the empirical frequency at that period.
/// The minimizer tie band widens as 12/t because t observations cannot rank
/// parameters whose divergences differ by less than about 1/t. eta <= 0 uses
/// twice the median nearest-neighbor spacing of the parameter grid.
std::vector<ConcentrationPoint> concentration_diagnostic(
    const LearningTrace& trace, const FiniteSmdp& smdp, double eta = 0.0);

}  // namespace berknash
