#include "berknash/examples.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace berknash::examples {

namespace {

constexpr double kSpanSd = 6.0;

void validate_growth(const GrowthParams& p) {
  if (!(p.beta_star > 0.0 && p.beta_star < 1.0)) {
    throw std::invalid_argument(
        "growth: beta_star must lie in (0,1) for a stationary income "
        "process");
  }
  if (!(p.delta > 0.0 && p.delta < 1.0) || !(p.delta * p.beta_star < 1.0)) {
    throw std::invalid_argument(
        "growth: need delta in (0,1) and delta * beta_star < 1");
  }
  if (!(p.q > 0.0 && p.q < 1.0) || !(p.H > p.L) || !(p.L > 0.0)) {
    throw std::invalid_argument(
        "growth: taste shock needs 0 < L < H and q in (0,1)");
  }
  if (p.income_bins < 3 || p.fraction_count < 2) {
    throw std::invalid_argument(
        "growth: need at least 3 income bins and 2 fractions");
  }
  if (!(p.fraction_min > 0.0 && p.fraction_min < p.fraction_max &&
        p.fraction_max < 1.0)) {
    throw std::invalid_argument(
        "growth: fractions must satisfy 0 < min < max < 1");
  }
  if (!(p.floor_fraction > 0.0 && p.floor_fraction < p.fraction_min)) {
    throw std::invalid_argument(
        "growth: floor_fraction must lie in (0, fraction_min)");
  }
  if (!std::isfinite(p.alpha_star) || !std::isfinite(p.gamma_star)) {
    throw std::invalid_argument("growth: coefficients must be finite");
  }
}

/// Standard normal mass on [a, b], evaluated through the survival function
/// on whichever side avoids cancellation, so far-tail bins keep a tiny but
/// strictly positive value and every kernel in the family has full support.
double normal_mass(double a, double b) {
  const double rt = std::sqrt(2.0);
  double mass;
  if (a >= 0.0) {
    mass = 0.5 * (std::erfc(a / rt) - std::erfc(b / rt));
  } else if (b <= 0.0) {
    mass = 0.5 * (std::erfc(-b / rt) - std::erfc(-a / rt));
  } else {
    mass = 0.5 * (std::erf(b / rt) - std::erf(a / rt));
  }
  return std::max(mass, 5e-324);
}

/// Probabilities of the income bins for next log income ~ N(mean, 1); the
/// mass falling outside the grid is folded back by renormalization.
void bin_row(const GrowthLayout& lay, double mean,
             Eigen::Ref<Eigen::VectorXd> out) {
  const int bins = static_cast<int>(lay.log_income_mids.size());
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    out[b] = normal_mass(lay.log_income_edges[size_t(b)] - mean,
                         lay.log_income_edges[size_t(b) + 1] - mean);
    total += out[b];
  }
  if (!(total > 0.0)) {
    std::ostringstream msg;
    msg << "growth: conditional mean " << mean
        << " has no representable mass on the income grid";
    throw std::runtime_error(msg.str());
  }
  out /= total;
}

double floor_log_investment(const GrowthParams& p, const GrowthLayout& lay) {
  return std::log(p.floor_fraction) + lay.log_income_mids.front();
}

double investment_log(const GrowthParams& p, const GrowthLayout& lay,
                      double fraction, double log_income) {
  const double lx = std::log(fraction <= 0.0 ? 1.0 : fraction) + log_income;
  const double lf = floor_log_investment(p, lay);
  return fraction <= 0.0 ? lf : std::max(lx, lf);
}

/// Kernels indexed by (intercept, slope) of the perceived production
/// function; the taste shock's own law is known and the production side
/// ignores it.
class OmittedShockFamily final : public KernelFamily {
 public:
  OmittedShockFamily(Matrix params, GrowthLayout lay, double q,
                     std::vector<double> pair_log_investment)
      : params_(std::move(params)),
        lay_(std::move(lay)),
        q_(q),
        lnx_(std::move(pair_log_investment)) {}

  int size() const override { return static_cast<int>(params_.rows()); }
  int param_dim() const override { return 2; }
  Vector parameter(int k) const override { return params_.row(k); }

  void row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const override {
    const int bins = static_cast<int>(lay_.log_income_mids.size());
    const double mean =
        params_(k, 0) + params_(k, 1) * lnx_[static_cast<size_t>(p)];
    Vector y(bins);
    bin_row(lay_, mean, y);
    for (int b = 0; b < bins; ++b) {
      out[2 * b] = y[b] * (1.0 - q_);
      out[2 * b + 1] = y[b] * q_;
    }
  }

 private:
  Matrix params_;
  GrowthLayout lay_;
  double q_;
  std::vector<double> lnx_;
};

}  // namespace

GrowthParams growth_default_params() { return GrowthParams{}; }

GrowthParams growth_small_params() {
  GrowthParams p;
  p.income_bins = 21;
  p.fraction_count = 8;
  p.grid.alpha_lattice = 7;
  p.grid.beta_lattice = 11;
  p.grid.beta_window = 0.03;
  p.grid.beta_window_step = 1e-3;
  return p;
}

namespace {

/// Income bins and the log-spaced base fractions, before the balanced-fit
/// shares are appended.
GrowthLayout base_layout(const GrowthParams& p) {
  validate_growth(p);
  GrowthLayout lay;

  // Bounds wide enough for the stationary law: an AR(1) in log income with
  // slope beta_star, intercept spread driven by the taste shock and the
  // investment shares at slope beta_star.
  const double zbar = (1.0 - p.q) * p.L + p.q * p.H;
  auto share = [&](double z) {
    const double num = p.delta * p.beta_star * zbar;
    return num / ((1.0 - p.delta * p.beta_star) * z + num);
  };
  const double la_l = std::log(share(p.L));
  const double la_h = std::log(share(p.H));
  const double mean_drive = p.alpha_star +
                            p.beta_star * ((1.0 - p.q) * la_l + p.q * la_h) +
                            p.gamma_star * zbar;
  const double mean = mean_drive / (1.0 - p.beta_star);
  const double vz = p.q * (1.0 - p.q);
  const double drive_var =
      vz * std::pow(p.beta_star * (la_h - la_l) + p.gamma_star * (p.H - p.L),
                    2.0);
  const double sd =
      std::sqrt((drive_var + 1.0) / (1.0 - p.beta_star * p.beta_star));
  const double lo = mean - (kSpanSd * sd + 2.0);
  const double hi = mean + (kSpanSd * sd + 2.0);

  const int bins = p.income_bins;
  lay.log_income_edges.resize(static_cast<size_t>(bins) + 1);
  lay.log_income_mids.resize(static_cast<size_t>(bins));
  for (int b = 0; b <= bins; ++b) {
    lay.log_income_edges[size_t(b)] = lo + (hi - lo) * b / bins;
  }
  for (int b = 0; b < bins; ++b) {
    lay.log_income_mids[size_t(b)] =
        0.5 * (lay.log_income_edges[size_t(b)] +
               lay.log_income_edges[size_t(b) + 1]);
  }

  lay.fractions.push_back(0.0);
  const double llo = std::log(p.fraction_min);
  const double lhi = std::log(p.fraction_max);
  for (int i = 0; i < p.fraction_count; ++i) {
    lay.fractions.push_back(
        std::exp(llo + (lhi - llo) * i / (p.fraction_count - 1)));
  }
  return lay;
}

}  // namespace

GrowthLayout growth_layout(const GrowthParams& p) {
  GrowthLayout lay = base_layout(p);
  // A log-spaced fraction grid almost never contains the shares the agent
  // would settle on, which leaves the fitted-slope fixed point between
  // actions and biases any equilibrium read off the grid. Appending the two
  // shares consistent with that fixed point makes it expressible exactly.
  const GrowthOracle oracle(p);
  const double bm = oracle.beta_fixed();
  lay.fractions.push_back(oracle.share_low(bm));
  lay.fractions.push_back(oracle.share_high(bm));
  std::sort(lay.fractions.begin(), lay.fractions.end());
  lay.fractions.erase(std::unique(lay.fractions.begin(), lay.fractions.end()),
                      lay.fractions.end());
  return lay;
}

GrowthOracle::GrowthOracle(const GrowthParams& p)
    : params_(p), layout_(base_layout(p)) {
  // Damped iteration on the slope the agent would recover from data
  // generated by their own best response to that slope.
  double beta = params_.beta_star;
  double step = 0.5;
  double prev_change = 0.0;
  for (int it = 0; it < 400; ++it) {
    const double target = fitted_slope_at(beta);
    const double change = target - beta;
    if (std::abs(change) < 1e-11) {
      beta_fixed_ = beta;
      return;
    }
    if (it > 0 && change * prev_change < 0.0) step *= 0.7;
    prev_change = change;
    beta += step * change;
    beta = std::min(std::max(beta, 1e-6), 1.0 / params_.delta - 1e-6);
  }
  std::ostringstream msg;
  msg << "growth: slope iteration failed to settle; last iterate " << beta
      << " with change " << prev_change;
  throw std::runtime_error(msg.str());
}

double GrowthOracle::share_low(double beta) const {
  const GrowthParams& p = params_;
  if (!(beta >= 0.0 && beta <= 1.0 / p.delta)) {
    throw std::invalid_argument("growth: slope outside [0, 1/delta]");
  }
  const double zbar = (1.0 - p.q) * p.L + p.q * p.H;
  const double num = p.delta * beta * zbar;
  return num / ((1.0 - p.delta * beta) * p.L + num);
}

double GrowthOracle::share_high(double beta) const {
  const GrowthParams& p = params_;
  if (!(beta >= 0.0 && beta <= 1.0 / p.delta)) {
    throw std::invalid_argument("growth: slope outside [0, 1/delta]");
  }
  const double zbar = (1.0 - p.q) * p.L + p.q * p.H;
  const double num = p.delta * beta * zbar;
  return num / ((1.0 - p.delta * beta) * p.H + num);
}

GrowthOracle::ChainMoments GrowthOracle::chain_moments(double a_low,
                                                       double a_high) const {
  const GrowthParams& p = params_;
  const int bins = static_cast<int>(layout_.log_income_mids.size());

  // The shock is independent of current income, so the income marginal
  // evolves autonomously; its transition averages the two shock rows.
  Matrix trans(bins, bins);
  Vector row(bins);
  for (int b = 0; b < bins; ++b) {
    const double ly = layout_.log_income_mids[size_t(b)];
    trans.row(b).setZero();
    const double la[2] = {investment_log(p, layout_, a_low, ly),
                          investment_log(p, layout_, a_high, ly)};
    const double w[2] = {1.0 - p.q, p.q};
    const double zval[2] = {p.L, p.H};
    for (int z = 0; z < 2; ++z) {
      const double mean =
          p.alpha_star + p.beta_star * la[z] + p.gamma_star * zval[z];
      bin_row(layout_, mean, row);
      trans.row(b) += w[z] * row.transpose();
    }
  }

  // Stationary distribution: replace one balance equation by the
  // normalization and solve the dense system.
  Matrix a = trans.transpose() - Matrix::Identity(bins, bins);
  a.row(bins - 1).setOnes();
  Vector rhs = Vector::Zero(bins);
  rhs[bins - 1] = 1.0;
  Vector pi = a.partialPivLu().solve(rhs);
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();

  ChainMoments mom;
  for (int b = 0; b < bins; ++b) {
    mom.mean_log_income += pi[b] * layout_.log_income_mids[size_t(b)];
  }
  for (int b = 0; b < bins; ++b) {
    const double d = layout_.log_income_mids[size_t(b)] - mom.mean_log_income;
    mom.var_log_income += pi[b] * d * d;
  }
  const double mean_la = (1.0 - p.q) * std::log(a_low <= 0.0 ? 1.0 : a_low) +
                         p.q * std::log(a_high <= 0.0 ? 1.0 : a_high);
  if (a_low <= 0.0 || a_high <= 0.0) {
    // Floor investment: log investment is the constant floor level.
    mom.mean_log_investment = floor_log_investment(p, layout_);
  } else {
    mom.mean_log_investment = mean_la + mom.mean_log_income;
  }
  return mom;
}

double GrowthOracle::fitted_slope(double a_low, double a_high) const {
  const GrowthParams& p = params_;
  if (!(a_low >= 0.0 && a_high >= 0.0 && a_low < 1.0 && a_high < 1.0)) {
    throw std::invalid_argument("growth: shares must lie in [0,1)");
  }
  if (a_low <= 0.0 || a_high <= 0.0 ||
      std::abs(std::log(a_high) - std::log(a_low)) < 1e-12) {
    return p.beta_star;  // constant regressor contribution, no bias
  }
  const double dl = std::log(a_high) - std::log(a_low);
  const double vz = p.q * (1.0 - p.q);
  const double cov_shock = vz * (p.H - p.L) * dl;
  const double var_la = vz * dl * dl;
  const ChainMoments mom = chain_moments(a_low, a_high);
  return p.beta_star +
         p.gamma_star * cov_shock / (var_la + mom.var_log_income);
}

double GrowthOracle::fitted_slope_at(double beta) const {
  return fitted_slope(share_low(beta), share_high(beta));
}

std::pair<double, double> GrowthOracle::stationary_logs(double a_low,
                                                        double a_high) const {
  const ChainMoments mom = chain_moments(a_low, a_high);
  return {mom.mean_log_income, mom.mean_log_investment};
}

GrowthOracle growth_oracle(const GrowthParams& p) { return GrowthOracle(p); }

FiniteSmdp growth_build(const GrowthParams& p) {
  validate_growth(p);
  const GrowthLayout lay = growth_layout(p);
  const GrowthOracle oracle(p);
  const int bins = static_cast<int>(lay.log_income_mids.size());
  const int n_states = 2 * bins;
  const int n_actions = static_cast<int>(lay.fractions.size());

  std::vector<std::string> states(static_cast<size_t>(n_states));
  for (int b = 0; b < bins; ++b) {
    states[size_t(2 * b)] = "y" + std::to_string(b) + "_L";
    states[size_t(2 * b + 1)] = "y" + std::to_string(b) + "_H";
  }
  std::vector<std::string> actions(static_cast<size_t>(n_actions));
  actions[0] = "keep";
  for (int i = 1; i < n_actions; ++i) {
    actions[size_t(i)] = "a" + std::to_string(i);
  }
  std::vector<std::vector<int>> feasible(static_cast<size_t>(n_states));
  std::vector<int> all(static_cast<size_t>(n_actions));
  for (int i = 0; i < n_actions; ++i) all[size_t(i)] = i;
  for (auto& f : feasible) f = all;

  const int n_pairs = n_states * n_actions;
  Matrix kernel(n_pairs, n_states);
  Matrix payoff(n_pairs, n_states);
  std::vector<double> pair_lnx(static_cast<size_t>(n_pairs));
  Vector yrow(bins);
  const double zval[2] = {p.L, p.H};
  int pr = 0;
  for (int s = 0; s < n_states; ++s) {
    const int b = s / 2;
    const int z = s % 2;
    const double ly = lay.log_income_mids[size_t(b)];
    const double income = std::exp(ly);
    for (int a = 0; a < n_actions; ++a, ++pr) {
      const double frac = lay.fractions[size_t(a)];
      const double lx = investment_log(p, lay, frac, ly);
      pair_lnx[size_t(pr)] = lx;
      const double spend = std::exp(lx);
      if (spend >= income) {
        throw std::invalid_argument(
            "growth: investment would exhaust income at the lowest bin; "
            "shrink floor_fraction or fraction_max");
      }
      const double mean = p.alpha_star + p.beta_star * lx +
                          p.gamma_star * zval[z];
      bin_row(lay, mean, yrow);
      for (int nb = 0; nb < bins; ++nb) {
        kernel(pr, 2 * nb) = yrow[nb] * (1.0 - p.q);
        kernel(pr, 2 * nb + 1) = yrow[nb] * p.q;
      }
      payoff.row(pr).setConstant(zval[z] * std::log(income - spend));
    }
  }

  Vector initial = Vector::Zero(n_states);
  {
    // Start at the bin nearest the stationary mean under the fitted slope.
    const auto logs = oracle.stationary_logs(
        oracle.share_low(oracle.beta_fixed()),
        oracle.share_high(oracle.beta_fixed()));
    int best = 0;
    for (int b = 1; b < bins; ++b) {
      if (std::abs(lay.log_income_mids[size_t(b)] - logs.first) <
          std::abs(lay.log_income_mids[size_t(best)] - logs.first)) {
        best = b;
      }
    }
    initial[2 * best] = 1.0 - p.q;
    initial[2 * best + 1] = p.q;
  }

  // Parameter atoms: a coarse lattice, a dense slope band paired with the
  // intercepts each slope's own stationary data would imply, and the
  // intercept line that exactly rationalizes floor investment.
  std::vector<std::pair<double, double>> atoms;
  const double beta_m = oracle.beta_fixed();
  const double lnx_floor = floor_log_investment(p, lay);

  auto implied_alpha = [&](double beta) {
    const auto logs =
        oracle.stationary_logs(oracle.share_low(beta),
                               oracle.share_high(beta));
    // Intercept of the least-squares fit: mean outcome minus slope times
    // mean regressor under that slope's stationary law.
    const double mean_next = logs.first;
    return mean_next - beta * logs.second;
  };

  double beta_lo = std::max(0.05, 0.25 * beta_m);
  double beta_hi = std::min(p.beta_star + 0.2, 1.0 / p.delta - 1e-3);
  if (beta_m > p.beta_star) beta_hi = std::min(beta_m + 0.2, 1.0 / p.delta - 1e-3);

  if (p.grid.inject_fitted_curve) {
    const double w = p.grid.beta_window;
    const double step = p.grid.beta_window_step;
    for (double b = std::max(beta_lo, beta_m - w);
         b <= std::min(beta_hi, beta_m + w) + 0.5 * step; b += step) {
      atoms.emplace_back(implied_alpha(b), b);
    }
    atoms.emplace_back(implied_alpha(beta_m), beta_m);
  }

  double floor_target = 0.0;
  {
    // Exact binned minimizer of the divergence on floor-investment data:
    // one-dimensional convex problem in the predicted mean.
    Vector truth(bins);
    Matrix rows(2, bins);
    for (int z = 0; z < 2; ++z) {
      const double mean = p.alpha_star + p.beta_star * lnx_floor +
                          p.gamma_star * zval[z];
      bin_row(lay, mean, truth);
      rows.row(z) = truth.transpose();
    }
    const double wz[2] = {1.0 - p.q, p.q};
    Vector model(bins);
    auto loss = [&](double c) {
      bin_row(lay, c, model);
      double acc = 0.0;
      for (int z = 0; z < 2; ++z) {
        for (int b = 0; b < bins; ++b) {
          const double t = rows(z, b);
          if (t <= 0.0) continue;
          if (model[b] <= 0.0) return kDivergenceInfinity;
          acc += wz[z] * t * std::log(t / model[b]);
        }
      }
      return acc;
    };
    const double center = p.alpha_star + p.beta_star * lnx_floor +
                          p.gamma_star * ((1.0 - p.q) * p.L + p.q * p.H);
    double lo = center - 2.0, hi = center + 2.0;
    const double gold = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gold * (hi - lo), x2 = lo + gold * (hi - lo);
    double f1 = loss(x1), f2 = loss(x2);
    while (hi - lo > 1e-12) {
      if (f1 < f2) {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - gold * (hi - lo);
        f1 = loss(x1);
      } else {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + gold * (hi - lo);
        f2 = loss(x2);
      }
    }
    floor_target = 0.5 * (lo + hi);
  }
  if (p.grid.inject_floor_line) {
    for (int i = 0; i <= p.grid.beta_lattice; ++i) {
      const double b = beta_lo + (beta_hi - beta_lo) * i / p.grid.beta_lattice;
      atoms.emplace_back(floor_target - b * lnx_floor, b);
    }
    atoms.emplace_back(floor_target, 0.0);
    atoms.emplace_back(floor_target - beta_m * lnx_floor, beta_m);
  }

  {
    double alo = std::min(implied_alpha(beta_m), floor_target - beta_hi * lnx_floor);
    double ahi = std::max(implied_alpha(beta_m), floor_target);
    const double pad = 0.5 * (ahi - alo) + 0.5;
    alo -= pad;
    ahi += pad;
    for (int i = 0; i <= p.grid.alpha_lattice; ++i) {
      for (int j = 0; j <= p.grid.beta_lattice; ++j) {
        atoms.emplace_back(alo + (ahi - alo) * i / p.grid.alpha_lattice,
                           beta_lo + (beta_hi - beta_lo) * j /
                                         p.grid.beta_lattice);
      }
    }
  }
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());

  Matrix params(static_cast<Eigen::Index>(atoms.size()), 2);
  for (size_t k = 0; k < atoms.size(); ++k) {
    params(static_cast<Eigen::Index>(k), 0) = atoms[k].first;
    params(static_cast<Eigen::Index>(k), 1) = atoms[k].second;
  }

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(std::move(states), std::move(actions),
                        std::move(feasible), std::move(initial),
                        std::move(kernel), std::move(payoff), p.delta);
  smdp.family = std::make_shared<OmittedShockFamily>(
      std::move(params), lay, p.q, std::move(pair_lnx));
  return smdp;
}

}  // namespace berknash::examples
