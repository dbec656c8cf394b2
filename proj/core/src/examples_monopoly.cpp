#include "berknash/examples.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "berknash/mdp.hpp"

namespace berknash::examples {

namespace {

void validate_monopoly(const MonopolyParams& p) {
  const double probs[] = {p.q0L, p.q0H, p.q1L, p.q1H};
  for (double q : probs) {
    if (!(q > 0.0 && q < 1.0)) {
      throw std::invalid_argument(
          "monopoly: sale probabilities must lie strictly inside (0,1)");
    }
  }
  if (!(p.q1L > p.q0L) || !(p.q1H > p.q0H)) {
    throw std::invalid_argument(
        "monopoly: a sale last period must raise this period's sale "
        "probability (q1x > q0x)");
  }
  if (!(p.q0L > p.q0H) || !(p.q1L > p.q1H)) {
    throw std::invalid_argument(
        "monopoly: the low price must sell more often (qsL > qsH)");
  }
  if (!(p.L > 0.0 && p.H > p.L)) {
    throw std::invalid_argument("monopoly: prices must satisfy 0 < L < H");
  }
  const double ratio = p.H / p.L;
  if (!(ratio > p.q1L / p.q1H && ratio < p.q0L / p.q0H)) {
    throw std::invalid_argument(
        "monopoly: H/L must lie in (q1L/q1H, q0L/q0H) so that the myopic "
        "best price depends on the state");
  }
  if (!(p.delta >= 0.0 && p.delta < 1.0)) {
    throw std::invalid_argument("monopoly: discount must lie in [0,1)");
  }
}

/// Kernels indexed by (theta_L, theta_H): the sale probability depends on
/// the price alone. Log tables over the atom list make whole-grid
/// divergence sweeps a few flops per atom.
class StaticDemandFamily final : public KernelFamily {
 public:
  StaticDemandFamily(Matrix params, std::vector<int> price_of_pair)
      : params_(std::move(params)), price_(std::move(price_of_pair)) {
    const int n = static_cast<int>(params_.rows());
    for (int x = 0; x < 2; ++x) {
      log_theta_[x].resize(n);
      log_comp_[x].resize(n);
      for (int k = 0; k < n; ++k) {
        const double t = params_(k, x);
        log_theta_[x][k] = t > 0.0
                               ? std::log(t)
                               : -std::numeric_limits<double>::infinity();
        log_comp_[x][k] = t < 1.0
                              ? std::log1p(-t)
                              : -std::numeric_limits<double>::infinity();
      }
    }
  }

  int size() const override { return static_cast<int>(params_.rows()); }
  int param_dim() const override { return 2; }
  Vector parameter(int k) const override { return params_.row(k); }

  void row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const override {
    const double t = params_(k, price_[static_cast<size_t>(p)]);
    out[0] = 1.0 - t;
    out[1] = t;
  }

  void mixture_row(const Vector& mu, int p,
                   Eigen::Ref<Eigen::VectorXd> out) const override {
    // Rows are affine in theta, so the mixture is the row at the mean.
    const double t = params_.col(price_[static_cast<size_t>(p)]).dot(mu);
    out[1] = t;
    out[0] = mu.sum() - t;
  }

  bool batched_divergence(const Matrix& true_kernel,
                          const Vector& pair_weights,
                          Vector& out) const override {
    // Collapse the weighted divergence to per-price sufficient statistics:
    // sum_p w_p KL(q_p || theta_x(p)) = const - sum_x (A_x ln theta_x
    // + B_x ln(1-theta_x)) with A_x the weighted sale mass under price x.
    double a[2] = {0.0, 0.0};
    double b[2] = {0.0, 0.0};
    double base = 0.0;
    for (Eigen::Index p = 0; p < pair_weights.size(); ++p) {
      const double w = pair_weights[p];
      if (w <= 0.0) continue;
      const double q = true_kernel(p, 1);
      const int x = price_[static_cast<size_t>(p)];
      a[x] += w * q;
      b[x] += w * (1.0 - q);
      if (q > 0.0) base += w * q * std::log(q);
      if (q < 1.0) base += w * (1.0 - q) * std::log1p(-q);
    }
    const int n = size();
    for (int k = 0; k < n; ++k) {
      double v = base;
      for (int x = 0; x < 2 && std::isfinite(v); ++x) {
        if (a[x] > 0.0) {
          v = std::isfinite(log_theta_[x][k]) ? v - a[x] * log_theta_[x][k]
                                              : kDivergenceInfinity;
        }
        if (b[x] > 0.0 && std::isfinite(v)) {
          v = std::isfinite(log_comp_[x][k]) ? v - b[x] * log_comp_[x][k]
                                             : kDivergenceInfinity;
        }
      }
      out[k] = v;
    }
    return true;
  }

 private:
  Matrix params_;
  std::vector<int> price_;
  Vector log_theta_[2];
  Vector log_comp_[2];
};

std::vector<std::pair<double, double>> monopoly_atoms(
    const MonopolyParams& p, const MonopolyOracle& oracle) {
  std::vector<std::pair<double, double>> atoms;
  const int r = std::max(1, p.grid.resolution);
  atoms.reserve(static_cast<size_t>((r + 1) * (r + 1)));
  for (int i = 0; i <= r; ++i) {
    for (int j = 0; j <= r; ++j) {
      atoms.emplace_back(double(i) / r, double(j) / r);
    }
  }
  if (p.grid.inject_response_curve && p.grid.curve_step > 0.0) {
    const int n = std::max(1, int(std::lround(1.0 / p.grid.curve_step)));
    for (int i = 0; i <= n; ++i) {
      const double s = double(i) / n;
      atoms.emplace_back(oracle.sale_prob(false, s),
                         oracle.sale_prob(true, s));
    }
    // Beliefs that support the two pure strategies: the unplayed price's
    // parameter is unconstrained by the data, and these corners make the
    // supported price look best.
    atoms.emplace_back(oracle.sale_prob(false, 0.0), 0.0);
    atoms.emplace_back(0.0, oracle.sale_prob(true, 1.0));
    const double star = oracle.sigma_high();
    if (star > 0.0 && star < 1.0) {
      atoms.emplace_back(oracle.sale_prob(false, star),
                         oracle.sale_prob(true, star));
    }
  }
  for (const auto& extra : p.grid.extra_atoms) {
    if (!(extra.first >= 0.0 && extra.first <= 1.0 && extra.second >= 0.0 &&
          extra.second <= 1.0)) {
      throw std::invalid_argument(
          "monopoly: extra grid atoms must lie in [0,1]^2");
    }
    atoms.push_back(extra);
  }
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  return atoms;
}

}  // namespace

FiniteSmdp monopoly_build(const MonopolyParams& p) {
  validate_monopoly(p);
  const MonopolyOracle oracle(p);

  std::vector<std::string> states = {"no_sale", "sale"};
  std::vector<std::string> actions = {"price_low", "price_high"};
  std::vector<std::vector<int>> feasible = {{0, 1}, {0, 1}};
  Vector initial(2);
  initial << 0.5, 0.5;

  // Pair order: (no_sale, L), (no_sale, H), (sale, L), (sale, H).
  Matrix kernel(4, 2);
  Matrix payoff(4, 2);
  const double sale_prob[2][2] = {{p.q0L, p.q0H}, {p.q1L, p.q1H}};
  const double price[2] = {p.L, p.H};
  std::vector<int> price_of_pair;
  for (int s = 0; s < 2; ++s) {
    for (int x = 0; x < 2; ++x) {
      const int row = 2 * s + x;
      kernel(row, 0) = 1.0 - sale_prob[s][x];
      kernel(row, 1) = sale_prob[s][x];
      payoff(row, 0) = 0.0;
      payoff(row, 1) = price[x];
      price_of_pair.push_back(x);
    }
  }

  const auto atoms = monopoly_atoms(p, oracle);
  Matrix params(static_cast<Eigen::Index>(atoms.size()), 2);
  for (size_t k = 0; k < atoms.size(); ++k) {
    params(static_cast<Eigen::Index>(k), 0) = atoms[k].first;
    params(static_cast<Eigen::Index>(k), 1) = atoms[k].second;
  }

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(std::move(states), std::move(actions),
                        std::move(feasible), std::move(initial),
                        std::move(kernel), std::move(payoff), p.delta);
  smdp.family = std::make_shared<StaticDemandFamily>(std::move(params),
                                                     std::move(price_of_pair));
  return smdp;
}

MonopolyOracle::MonopolyOracle(const MonopolyParams& p) : params_(p) {
  validate_monopoly(p);
  ratio_low_ =
      p.q0L / ((1.0 - p.q1L) * p.q0H + p.q1H * p.q0L);
  ratio_high_ = (1.0 - p.q1H) * p.q0L / p.q0H + p.q1L;

  // Equilibrium regime: the perceived margin at the fitted parameters is
  // strictly decreasing in sigma_high, so its signs at the corners decide
  // everything and the interior case is a clean bisection.
  if (margin(0.0) <= 0.0) {
    sigma_high_ = 0.0;
  } else if (margin(1.0) >= 0.0) {
    sigma_high_ = 1.0;
  } else {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      (margin(mid) > 0.0 ? lo : hi) = mid;
    }
    sigma_high_ = 0.5 * (lo + hi);
  }

  // Patience threshold: largest price ratio at which the fully informed
  // seller still prices low everywhere. The optimal-policy check is exact,
  // so plain bisection on the ratio suffices.
  auto always_low_optimal = [&](double ratio) {
    MonopolyParams probe = p;
    probe.H = ratio * p.L;
    Matrix kernel(4, 2), payoff(4, 2);
    const double sale_prob[2][2] = {{p.q0L, p.q0H}, {p.q1L, p.q1H}};
    const double price[2] = {probe.L, probe.H};
    for (int s = 0; s < 2; ++s) {
      for (int x = 0; x < 2; ++x) {
        kernel(2 * s + x, 0) = 1.0 - sale_prob[s][x];
        kernel(2 * s + x, 1) = sale_prob[s][x];
        payoff(2 * s + x, 0) = 0.0;
        payoff(2 * s + x, 1) = price[x];
      }
    }
    FiniteMdp mdp({"no_sale", "sale"}, {"price_low", "price_high"},
                  {{0, 1}, {0, 1}}, Vector::Constant(2, 0.5),
                  std::move(kernel), std::move(payoff), p.delta);
    SolveOptions opts;
    opts.tol = 1e-12;
    const ValueFunction vf = value_iteration(mdp, opts);
    const Vector q = q_values(mdp, vf.values);
    return is_optimal(mdp, pure_strategy(mdp, {0, 0}), kOptTol, nullptr, &q)
        .optimal;
  };
  double lo = p.q1L / p.q1H;
  double hi = p.q0L / p.q0H;
  for (int it = 0; it < 100 && hi - lo > 1e-11; ++it) {
    const double mid = 0.5 * (lo + hi);
    (always_low_optimal(mid) ? lo : hi) = mid;
  }
  patience_bound_ = 0.5 * (lo + hi);
}

double MonopolyOracle::state_share(double sigma_high) const {
  const MonopolyParams& p = params_;
  const double q0 = (1.0 - sigma_high) * p.q0L + sigma_high * p.q0H;
  const double q1 = (1.0 - sigma_high) * p.q1L + sigma_high * p.q1H;
  return q0 / (1.0 - q1 + q0);
}

double MonopolyOracle::sale_prob(bool high_price, double sigma_high) const {
  const MonopolyParams& p = params_;
  const double share = state_share(sigma_high);
  const double q0 = high_price ? p.q0H : p.q0L;
  const double q1 = high_price ? p.q1H : p.q1L;
  return (1.0 - share) * q0 + share * q1;
}

double MonopolyOracle::margin(double sigma_high) const {
  return params_.H * sale_prob(true, sigma_high) -
         params_.L * sale_prob(false, sigma_high);
}

MonopolyOracle monopoly_oracle(const MonopolyParams& p) {
  return MonopolyOracle(p);
}

}  // namespace berknash::examples
