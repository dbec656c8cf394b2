#pragma once

#include <string>
#include <utility>
#include <vector>

#include "berknash/model.hpp"

namespace berknash::examples {

// ---------------------------------------------------------------------------
// Repeat-sale pricing: two demand states, two prices, a seller whose model
// family ignores demand persistence.
// ---------------------------------------------------------------------------

/// Parameter grid for the static-demand family. Besides a uniform lattice on
/// [0,1]^2, the builder can thread atoms along the image of
/// sigma_high -> (mean sale prob at L, mean sale prob at H), which is where
/// fitted parameters live for state-independent strategies, plus any caller
/// supplied atoms. Duplicates are removed.
struct PricingGrid {
  int resolution = 100;
  bool inject_response_curve = true;
  double curve_step = 2e-5;
  std::vector<std::pair<double, double>> extra_atoms;
};

struct MonopolyParams {
  /// True sale probabilities indexed by (last-period demand state, price).
  double q0L = 0.6;
  double q0H = 0.3;
  double q1L = 0.9;
  double q1H = 0.7;
  double L = 1.0;
  double H = 1.4;
  double delta = 0.8;
  PricingGrid grid;
};

/// Two-state SMDP. State 1 means a sale happened last period; the flow payoff
/// of (s, price, s') is price * s'. The family's kernels make the sale
/// probability depend on the price only, so the seller can never represent
/// the true persistence. Throws std::invalid_argument when the parameters
/// break monotonicity (higher demand state or lower price must raise the sale
/// probability) or when H/L leaves (q1L/q1H, q0L/q0H), the band on which the
/// myopic pricing problem is non-trivial.
FiniteSmdp monopoly_build(const MonopolyParams& p);

/// Closed-form reference values for the pricing model.
class MonopolyOracle {
 public:
  explicit MonopolyOracle(const MonopolyParams& p);

  /// Stationary probability of the high demand state when price H is chosen
  /// with probability sigma_high at every state.
  double state_share(double sigma_high) const;
  /// Mean sale probability of a price under that stationary distribution,
  /// i.e. the parameter a static model gets fitted to.
  double sale_prob(bool high_price, double sigma_high) const;
  /// Perceived flow advantage of H over L at the fitted parameters. Strictly
  /// decreasing in sigma_high; its sign classifies the equilibrium regime.
  double margin(double sigma_high) const;

  /// H/L below this bound forces sigma_high = 0, above ratio_high forces
  /// sigma_high = 1; in between the equilibrium mixes.
  double ratio_low() const { return ratio_low_; }
  double ratio_high() const { return ratio_high_; }
  /// H/L threshold below which the optimal policy of the fully informed
  /// seller at this discount factor is to always price low. Found by
  /// bisecting on the price ratio with an exact policy check at each probe.
  double patience_bound() const { return patience_bound_; }
  /// Equilibrium probability of the high price: a corner when H/L falls
  /// outside [ratio_low, ratio_high], otherwise the root of margin().
  double sigma_high() const { return sigma_high_; }

 private:
  MonopolyParams params_;
  double ratio_low_ = 0.0;
  double ratio_high_ = 0.0;
  double patience_bound_ = 0.0;
  double sigma_high_ = 0.0;
};

MonopolyOracle monopoly_oracle(const MonopolyParams& p);

// ---------------------------------------------------------------------------
// Job search: wage offers with correlated arrival and separation risk, an
// agent whose model family treats the arrival rate as a constant.
// ---------------------------------------------------------------------------

/// One support point of the fundamental state: separation risk gamma, offer
/// arrival rate lambda, probability weight.
struct SearchZPoint {
  double gamma = 0.0;
  double lambda = 0.0;
  double weight = 0.0;
};

struct SearchParams {
  /// State grid. wages[0] must be 0 (the no-offer state); the rest are the
  /// positive offer levels, strictly increasing.
  std::vector<double> wages;
  /// Offer distribution over wages[1..], same length, sums to 1.
  std::vector<double> offer_probs;
  std::vector<SearchZPoint> z;
  double delta = 0.9;
  /// Model grid: a uniform lattice of arrival rates on (0,1) plus, when
  /// inject_threshold_set is on, every value the fitted arrival rate can take
  /// across threshold strategies (one per distinct acceptance probability).
  int theta_lattice = 101;
  bool inject_threshold_set = true;
  std::vector<double> extra_theta;
};

/// Default instance: n_wages equally spaced states on [0,1] (0 first), a
/// uniform offer distribution, and a two-point fundamental with negatively
/// correlated arrival and retention.
SearchParams search_default_params(int n_wages = 201);

/// States = wage grid, actions {reject, accept}; only reject is feasible at
/// the no-offer state. Accepting pays the wage each period the job lasts.
/// The family fixes the separation hazard at its true mean and replaces the
/// offer arrival process with a single constant.
FiniteSmdp search_build(const SearchParams& p);

/// Reference values from the one-dimensional reductions of the search model.
class SearchOracle {
 public:
  explicit SearchOracle(const SearchParams& p);

  double gamma_bar() const { return gamma_bar_; }
  double lambda_bar() const { return lambda_bar_; }
  /// E[gamma * lambda] and its covariance with means removed.
  double joint_mean() const { return joint_mean_; }
  double covariance() const { return covariance_; }

  /// Reservation wage of an agent whose model says offers arrive with
  /// constant probability theta. Bisection to 1e-10.
  double reservation_wage(double theta) const;
  /// Arrival rate the agent fits when a share m_unemployed of time is spent
  /// without an accepted job.
  double fitted_theta(double m_unemployed) const;
  /// Stationary share of periods in which no offer is held or the offer is
  /// rejected, under the threshold "accept wages >= w".
  double unemployed_share(double w) const;

  /// Reservation wage under the true compound process.
  double w_star() const { return w_star_; }
  /// Fixed point of w -> reservation_wage(fitted_theta(unemployed_share(w))).
  double w_fitted() const { return w_fitted_; }
  double theta_fitted() const { return theta_fitted_; }

 private:
  double expected_gain(double v) const;
  double stop_root(double coef) const;

  SearchParams params_;
  double gamma_bar_ = 0.0;
  double lambda_bar_ = 0.0;
  double joint_mean_ = 0.0;
  double covariance_ = 0.0;
  double w_star_ = 0.0;
  double w_fitted_ = 0.0;
  double theta_fitted_ = 0.0;
};

SearchOracle search_oracle(const SearchParams& p);

// ---------------------------------------------------------------------------
// Stochastic growth: log-linear production with a taste shock the agent's
// model omits from the production side.
// ---------------------------------------------------------------------------

struct GrowthThetaGrid {
  int alpha_lattice = 11;
  int beta_lattice = 21;
  /// Dense band of slopes around the fitted fixed point, paired with their
  /// implied intercepts, so the solver can land within oracle accuracy.
  bool inject_fitted_curve = true;
  double beta_window = 0.05;
  double beta_window_step = 5e-4;
  /// Atoms along the intercept line that rationalizes a constant investment
  /// floor, where the slope is unidentified.
  bool inject_floor_line = true;
};

struct GrowthParams {
  double alpha_star = 0.0;
  double beta_star = 0.5;
  double gamma_star = 0.5;
  /// Taste shock: value H with probability q, else L, drawn independently
  /// each period.
  double q = 0.5;
  double L = 1.0;
  double H = 2.0;
  double delta = 0.9;
  int income_bins = 101;
  int fraction_count = 16;
  double fraction_min = 0.02;
  double fraction_max = 0.85;
  /// Investment never falls below this fraction of the lowest grid income,
  /// so log investment stays defined for the zero-investment action.
  double floor_fraction = 1e-4;
  GrowthThetaGrid grid;
};

GrowthParams growth_default_params();
/// Smaller grids everywhere; same economics. Meant for equilibrium
/// refinement runs where the full grids are needlessly slow.
GrowthParams growth_small_params();

/// Shared discretization between the builder and the oracle.
struct GrowthLayout {
  /// Bin midpoints and edges in log income; edges has one more entry.
  std::vector<double> log_income_mids;
  std::vector<double> log_income_edges;
  /// Investment fractions, ascending; first entry is 0 (floor investment).
  /// Besides the log-spaced base grid this holds the two shares consistent
  /// with the fitted-slope fixed point, so the long-run fit is expressible
  /// exactly on the action grid.
  std::vector<double> fractions;
};

GrowthLayout growth_layout(const GrowthParams& p);

/// States = income bin x taste shock, actions = investment fractions.
/// True log income tomorrow is alpha* + beta* ln x + gamma* z + noise,
/// binned and truncated at +-6 conditional standard deviations; the family
/// drops the gamma* z term, which correlates with investment through the
/// policy and biases the fitted slope.
FiniteSmdp growth_build(const GrowthParams& p);

/// Reference values built on the closed-form investment shares and the
/// stationary moments of the discretized income chain.
class GrowthOracle {
 public:
  explicit GrowthOracle(const GrowthParams& p);

  /// Optimal investment share at taste shock L or H when the agent believes
  /// the production slope is beta. Shares coincide at beta = 0 and at
  /// beta = 1/delta.
  double share_low(double beta) const;
  double share_high(double beta) const;

  /// Slope recovered by least squares from data generated under constant
  /// shares (a_low, a_high). Uses the stationary law of the discretized
  /// income chain for the variance term.
  double fitted_slope(double a_low, double a_high) const;
  /// Convenience composition fitted_slope(share_low(beta), share_high(beta)).
  double fitted_slope_at(double beta) const;

  /// Fixed point of fitted_slope_at on (0, 1/delta), by damped iteration.
  /// Throws std::runtime_error with the iterates when it fails to settle.
  double beta_fixed() const { return beta_fixed_; }

  /// Stationary mean of log income and log investment under constant shares;
  /// used to place intercept atoms in the parameter grid.
  std::pair<double, double> stationary_logs(double a_low, double a_high) const;

 private:
  struct ChainMoments {
    double mean_log_income = 0.0;
    double var_log_income = 0.0;
    double mean_log_investment = 0.0;
  };
  ChainMoments chain_moments(double a_low, double a_high) const;

  GrowthParams params_;
  GrowthLayout layout_;
  double beta_fixed_ = 0.0;
};

GrowthOracle growth_oracle(const GrowthParams& p);

// ---------------------------------------------------------------------------
// Two-armed experimentation: a one-shot information purchase whose worth the
// frozen-belief valuation misses entirely.
// ---------------------------------------------------------------------------

/// Six states: the initial choice node, the two continuation nodes reached
/// only under one parameter each, two absorbing nodes that mark which
/// parameter generated an informative payoff, and a terminal node. Encoding
/// parameter-dependent payoffs through the revealing successor keeps the
/// payoff function parameter-free, which the pair-payoff representation
/// requires. true_theta picks which of the two parameter atoms drives the
/// objective process and must be exactly 0 or 1.
FiniteSmdp experimentation_build(double delta, double true_theta = 1.0);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Named instances for the CLI: monopoly-default, search-default,
/// growth-default, growth-small, experimentation-075, coin-default,
/// coin-ambiguous. Throws std::invalid_argument listing the known names.
FiniteSmdp build_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace berknash::examples
