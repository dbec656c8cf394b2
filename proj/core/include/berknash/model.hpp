#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace berknash {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Absolute slack accepted on any ingested probability vector. Rows whose sum
/// is within this of 1 are renormalized silently; anything further off is a
/// validation error.
inline constexpr double kProbTol = 1e-12;

/// Default absolute tolerance for declaring an action optimal.
inline constexpr double kOptTol = 1e-9;

/// Default absolute tolerance for membership in a divergence-minimizer set.
inline constexpr double kWkldTol = 1e-9;

/// Sentinel for an infinite divergence (true kernel puts mass where a model
/// kernel has none). Compared and propagated explicitly, never reached by
/// overflow of a finite sum.
inline constexpr double kDivergenceInfinity =
    std::numeric_limits<double>::infinity();

struct StateActionPair {
  int state = 0;
  int action = 0;
};

/// Finite Markov decision process with state-dependent feasible action sets.
///
/// States and actions are referred to by dense indices internally; the string
/// names used in model files are kept for reporting. Transition and payoff
/// data live on the flattened list of feasible pairs (the graph of the
/// feasibility map), in state-major order.
class FiniteMdp {
 public:
  FiniteMdp() = default;

  /// kernel and payoff have one row per feasible pair and one column per
  /// state. Throws std::invalid_argument on shape errors; value-level
  /// problems (row sums, negative entries) are left for validate().
  FiniteMdp(std::vector<std::string> state_names,
            std::vector<std::string> action_names,
            std::vector<std::vector<int>> feasible, Vector initial,
            Matrix kernel, Matrix payoff, double discount);

  int n_states() const { return static_cast<int>(state_names_.size()); }
  int n_actions() const { return static_cast<int>(action_names_.size()); }
  int n_pairs() const { return static_cast<int>(pairs_.size()); }

  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<std::string>& action_names() const {
    return action_names_;
  }
  const std::vector<int>& feasible(int state) const {
    return feasible_[static_cast<size_t>(state)];
  }
  const std::vector<std::vector<int>>& feasible() const { return feasible_; }
  const Vector& initial() const { return initial_; }
  const Matrix& kernel() const { return kernel_; }
  const Matrix& payoff() const { return payoff_; }
  double discount() const { return discount_; }

  const std::vector<StateActionPair>& pairs() const { return pairs_; }
  const StateActionPair& pair(int p) const {
    return pairs_[static_cast<size_t>(p)];
  }

  /// Dense index of (state, action) among feasible pairs, or -1.
  int pair_index(int state, int action) const {
    return pair_index_[static_cast<size_t>(state * n_actions() + action)];
  }

  int state_index(const std::string& name) const;
  int action_index(const std::string& name) const;

  /// Largest absolute one-period payoff over feasible pairs and successors.
  double payoff_bound() const;

 private:
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
  std::vector<std::vector<int>> feasible_;
  Vector initial_;
  Matrix kernel_;
  Matrix payoff_;
  double discount_ = 0.0;
  std::vector<StateActionPair> pairs_;
  std::vector<int> pair_index_;
};

/// Stationary (Markov) strategy: probs(p) is the probability of the action in
/// pair p conditional on being at its state, so entries belonging to one
/// state sum to 1.
struct Strategy {
  Vector probs;
};

Strategy uniform_strategy(const FiniteMdp& mdp);
Strategy pure_strategy(const FiniteMdp& mdp, const std::vector<int>& action);
bool strategy_is_valid(const FiniteMdp& mdp, const Strategy& sigma,
                       double tol = 1e-9);
/// Per-state renormalization; throws if some state has no positive mass.
Strategy normalize_strategy(const FiniteMdp& mdp, Strategy sigma);

/// Probability weights over the parameter grid of a family.
struct Belief {
  Vector weights;
};

/// Probability weights over feasible state-action pairs.
struct OutcomeDistribution {
  Vector weights;
};

/// A parametrized collection of transition kernels on the same feasible
/// pairs, sampled on a finite parameter grid. Implementations may store rows
/// densely or generate them on demand; overridable hooks let structured
/// families (binary outcomes, discretized location families) answer
/// divergence and mixture queries in closed form.
class KernelFamily {
 public:
  virtual ~KernelFamily() = default;

  virtual int size() const = 0;
  virtual int param_dim() const = 0;
  virtual Vector parameter(int k) const = 0;

  /// Writes the transition row of grid point k at feasible pair p.
  virtual void row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const = 0;

  /// Sum over successors of q * ln(q / q_k) for the true row q at pair p.
  /// Returns kDivergenceInfinity when q puts mass where q_k has none.
  /// Default walks the row; structured families override.
  virtual double pair_divergence(const Matrix& true_kernel, int p,
                                 int k) const;

  /// Writes sum_k mu(k) row(k, p). Default accumulates over the support of
  /// mu; structured families may override (e.g. families affine in theta).
  virtual void mixture_row(const Vector& mu, int p,
                           Eigen::Ref<Eigen::VectorXd> out) const;

  /// Fills out(k) with the pair-weighted divergence of every grid point at
  /// once and returns true, or returns false to make the caller fall back to
  /// the per-pair loop. pair_weights has one entry per feasible pair and sums
  /// to one. Families with precomputable per-point terms override this; the
  /// base implementation always declines.
  virtual bool batched_divergence(const Matrix& true_kernel,
                                  const Vector& pair_weights,
                                  Vector& out) const;

  /// All grid parameters stacked row-wise (size() x param_dim()).
  Matrix parameter_matrix() const;
};

/// Family backed by one dense kernel matrix per grid point.
class DenseFamily final : public KernelFamily {
 public:
  DenseFamily(Matrix parameters, std::vector<Matrix> kernels);

  int size() const override { return static_cast<int>(kernels_.size()); }
  int param_dim() const override {
    return static_cast<int>(parameters_.cols());
  }
  Vector parameter(int k) const override { return parameters_.row(k); }
  void row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const override;
  double pair_divergence(const Matrix& true_kernel, int p,
                         int k) const override;
  void mixture_row(const Vector& mu, int p,
                   Eigen::Ref<Eigen::VectorXd> out) const override;

  const Matrix& kernel(int k) const {
    return kernels_[static_cast<size_t>(k)];
  }

 private:
  Matrix parameters_;
  std::vector<Matrix> kernels_;
};

/// Subjective MDP: an objective process together with the decision maker's
/// parametrized family of candidate kernels.
struct FiniteSmdp {
  FiniteMdp base;
  std::shared_ptr<const KernelFamily> family;

  int n_params() const { return family ? family->size() : 0; }
};

Belief uniform_belief(const FiniteSmdp& smdp);
Belief point_mass_belief(const FiniteSmdp& smdp, int k);

/// Kernel of the mixture model under belief mu, one row per feasible pair.
Matrix mixture_kernel(const FiniteSmdp& smdp, const Belief& mu);

/// Cartesian-product grid helper: lo, hi and counts per dimension; points
/// are emitted with the last dimension varying fastest.
std::vector<Vector> make_uniform_grid(const std::vector<double>& lo,
                                      const std::vector<double>& hi,
                                      const std::vector<int>& counts);

struct ValidationIssue {
  std::string where;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  /// True when some grid parameter's kernel is positive wherever the true
  /// kernel is. A failure is also recorded as an issue.
  bool regularity_ok = true;
  /// Set when the family was too large to check every row and a
  /// deterministic subsample was used instead.
  bool rows_sampled = false;

  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

ValidationReport validate(const FiniteMdp& mdp);
ValidationReport validate(const FiniteSmdp& smdp);

}  // namespace berknash
