#include "berknash/examples.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace berknash::examples {

namespace {

struct SearchMoments {
  double gamma_bar = 0.0;
  double lambda_bar = 0.0;
  double joint = 0.0;  // E[gamma * lambda]
};

SearchMoments search_moments(const SearchParams& p) {
  SearchMoments m;
  double total = 0.0;
  for (const auto& zp : p.z) {
    total += zp.weight;
    m.gamma_bar += zp.weight * zp.gamma;
    m.lambda_bar += zp.weight * zp.lambda;
    m.joint += zp.weight * zp.gamma * zp.lambda;
  }
  m.gamma_bar /= total;
  m.lambda_bar /= total;
  m.joint /= total;
  return m;
}

void validate_search(const SearchParams& p) {
  if (p.wages.size() < 2 || p.wages.front() != 0.0) {
    throw std::invalid_argument(
        "search: the wage grid needs the no-offer state 0 first and at "
        "least one positive wage");
  }
  for (size_t i = 1; i < p.wages.size(); ++i) {
    if (!(p.wages[i] > p.wages[i - 1]) || p.wages[i] > 1.0) {
      throw std::invalid_argument(
          "search: wages must be strictly increasing within (0,1]");
    }
  }
  if (p.offer_probs.size() != p.wages.size() - 1) {
    throw std::invalid_argument(
        "search: need one offer probability per positive wage");
  }
  double total = 0.0;
  for (double f : p.offer_probs) {
    if (f < 0.0) {
      throw std::invalid_argument("search: offer probabilities must be >= 0");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("search: offer probabilities must sum to 1");
  }
  if (p.z.empty()) {
    throw std::invalid_argument("search: need at least one fundamental point");
  }
  double zw = 0.0;
  for (const auto& zp : p.z) {
    if (!(zp.gamma > 0.0 && zp.gamma < 1.0 && zp.lambda > 0.0 &&
          zp.lambda < 1.0 && zp.weight > 0.0)) {
      throw std::invalid_argument(
          "search: fundamentals need gamma, lambda in (0,1) and positive "
          "weights");
    }
    zw += zp.weight;
  }
  if (std::abs(zw - 1.0) > 1e-9) {
    throw std::invalid_argument("search: fundamental weights must sum to 1");
  }
  if (!(p.delta >= 0.0 && p.delta < 1.0)) {
    throw std::invalid_argument("search: discount must lie in [0,1)");
  }
  if (p.theta_lattice < 1) {
    throw std::invalid_argument("search: theta_lattice must be positive");
  }
  for (double t : p.extra_theta) {
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument(
          "search: extra arrival-rate atoms must lie strictly inside (0,1)");
    }
  }
}

/// Kernels indexed by a constant offer arrival rate theta. The separation
/// hazard is pinned at its true mean, so only the arrival margin is free.
/// Rows are affine in theta and the divergence per pair collapses to a
/// three-term expression, the only state dependence being the overlap
/// between keeping a job at w and drawing a fresh offer equal to w.
class ConstantArrivalFamily final : public KernelFamily {
 public:
  ConstantArrivalFamily(Vector thetas, Vector offer_by_state,
                        std::vector<int> pair_state,
                        std::vector<char> pair_accept, SearchMoments mm,
                        const double* expected_kernel_data)
      : thetas_(std::move(thetas)),
        f_(std::move(offer_by_state)),
        state_(std::move(pair_state)),
        accept_(std::move(pair_accept)),
        m_(mm),
        expected_(expected_kernel_data) {}

  int size() const override { return static_cast<int>(thetas_.size()); }
  int param_dim() const override { return 1; }
  Vector parameter(int k) const override {
    return Vector::Constant(1, thetas_[k]);
  }

  void row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const override {
    const double t = thetas_[k];
    if (!accept_[static_cast<size_t>(p)]) {
      out = t * f_;
      out[0] = 1.0 - t;
    } else {
      out = (m_.gamma_bar * t) * f_;
      out[0] = m_.gamma_bar * (1.0 - t);
      out[state_[static_cast<size_t>(p)]] += 1.0 - m_.gamma_bar;
    }
  }

  void mixture_row(const Vector& mu, int p,
                   Eigen::Ref<Eigen::VectorXd> out) const override {
    const double scale = mu.sum();
    const double t = thetas_.dot(mu);
    if (!accept_[static_cast<size_t>(p)]) {
      out = t * f_;
      out[0] = scale - t;
    } else {
      out = (m_.gamma_bar * t) * f_;
      out[0] = m_.gamma_bar * (scale - t);
      out[state_[static_cast<size_t>(p)]] += (1.0 - m_.gamma_bar) * scale;
    }
  }

  double pair_divergence(const Matrix& true_kernel, int p,
                         int k) const override {
    // The closed form hardwires the builder's objective process; data
    // pointer identity survives moves of the owning model, and anything
    // else falls back to the generic row walk.
    if (true_kernel.data() != expected_) {
      return KernelFamily::pair_divergence(true_kernel, p, k);
    }
    const double t = thetas_[k];
    if (!(t > 0.0 && t < 1.0)) return kDivergenceInfinity;
    if (!accept_[static_cast<size_t>(p)]) {
      return m_.lambda_bar * std::log(m_.lambda_bar / t) +
             (1.0 - m_.lambda_bar) * std::log((1.0 - m_.lambda_bar) /
                                              (1.0 - t));
    }
    const double a = m_.joint;
    const double b = m_.gamma_bar - a;
    const double fi = f_[state_[static_cast<size_t>(p)]];
    const double stay_true = 1.0 - m_.gamma_bar + a * fi;
    const double stay_model = 1.0 - m_.gamma_bar + m_.gamma_bar * t * fi;
    double acc = a * (1.0 - fi) * std::log(a / (m_.gamma_bar * t)) +
                 stay_true * std::log(stay_true / stay_model);
    if (b > 0.0) {
      acc += b * std::log(b / (m_.gamma_bar * (1.0 - t)));
    }
    return acc;
  }

 private:
  Vector thetas_;
  Vector f_;  // offer probability per state, 0 at the no-offer state
  std::vector<int> state_;
  std::vector<char> accept_;
  SearchMoments m_;
  const double* expected_;
};

}  // namespace

SearchParams search_default_params(int n_wages) {
  if (n_wages < 2) {
    throw std::invalid_argument("search: need at least two wage points");
  }
  SearchParams p;
  p.wages.resize(static_cast<size_t>(n_wages));
  for (int i = 0; i < n_wages; ++i) {
    p.wages[static_cast<size_t>(i)] = double(i) / (n_wages - 1);
  }
  p.offer_probs.assign(static_cast<size_t>(n_wages - 1),
                       1.0 / (n_wages - 1));
  p.z = {{0.2, 0.9, 0.5}, {0.6, 0.5, 0.5}};
  p.delta = 0.9;
  return p;
}

FiniteSmdp search_build(const SearchParams& p) {
  validate_search(p);
  const SearchMoments mm = search_moments(p);
  const SearchOracle oracle(p);
  const int n = static_cast<int>(p.wages.size());

  std::vector<std::string> states(static_cast<size_t>(n));
  states[0] = "no_offer";
  for (int i = 1; i < n; ++i) {
    states[static_cast<size_t>(i)] = "w" + std::to_string(i);
  }
  std::vector<std::string> actions = {"reject", "accept"};
  std::vector<std::vector<int>> feasible(static_cast<size_t>(n),
                                         std::vector<int>{0, 1});
  feasible[0] = {0};

  Vector f = Vector::Zero(n);
  double fsum = 0.0;
  for (int i = 1; i < n; ++i) {
    f[i] = p.offer_probs[static_cast<size_t>(i - 1)];
    fsum += f[i];
  }
  f /= fsum;  // washes out the accepted 1e-9 slack

  const int n_pairs = 1 + 2 * (n - 1);
  Matrix kernel = Matrix::Zero(n_pairs, n);
  Matrix payoff = Matrix::Zero(n_pairs, n);
  std::vector<int> pair_state;
  std::vector<char> pair_accept;
  const double joint = mm.joint;
  const double lost = mm.gamma_bar - joint;  // separated, no new offer
  int row = 0;
  for (int s = 0; s < n; ++s) {
    // reject: next period is a fresh draw whatever the current state
    kernel.row(row) = (mm.lambda_bar * f).transpose();
    kernel(row, 0) = 1.0 - mm.lambda_bar;
    pair_state.push_back(s);
    pair_accept.push_back(0);
    ++row;
    if (s == 0) continue;
    // accept: keep the job, or separate into a draw that may arrive at once
    kernel.row(row) = (joint * f).transpose();
    kernel(row, 0) = lost;
    kernel(row, s) += 1.0 - mm.gamma_bar;
    payoff.row(row).setConstant(p.wages[static_cast<size_t>(s)]);
    pair_state.push_back(s);
    pair_accept.push_back(1);
    ++row;
  }

  Vector initial = Vector::Zero(n);
  initial[0] = 1.0;

  std::vector<double> thetas;
  for (int i = 1; i <= p.theta_lattice; ++i) {
    thetas.push_back(double(i) / (p.theta_lattice + 1));
  }
  if (p.inject_threshold_set) {
    // Every value the fitted arrival rate can take across threshold
    // strategies, so grid error never clouds the fixed-point comparison.
    for (int j = 1; j < n; ++j) {
      thetas.push_back(
          oracle.fitted_theta(oracle.unemployed_share(p.wages[size_t(j)])));
    }
    thetas.push_back(mm.lambda_bar);  // reject-everything limit
  }
  thetas.insert(thetas.end(), p.extra_theta.begin(), p.extra_theta.end());
  std::sort(thetas.begin(), thetas.end());
  thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());
  Vector theta_vec(static_cast<Eigen::Index>(thetas.size()));
  for (size_t k = 0; k < thetas.size(); ++k) {
    theta_vec[static_cast<Eigen::Index>(k)] = thetas[k];
  }

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(std::move(states), std::move(actions),
                        std::move(feasible), std::move(initial),
                        std::move(kernel), std::move(payoff), p.delta);
  smdp.family = std::make_shared<ConstantArrivalFamily>(
      std::move(theta_vec), std::move(f), std::move(pair_state),
      std::move(pair_accept), mm, smdp.base.kernel().data());
  return smdp;
}

SearchOracle::SearchOracle(const SearchParams& p) : params_(p) {
  validate_search(p);
  const SearchMoments mm = search_moments(p);
  gamma_bar_ = mm.gamma_bar;
  lambda_bar_ = mm.lambda_bar;
  joint_mean_ = mm.joint;
  covariance_ = mm.joint - mm.gamma_bar * mm.lambda_bar;

  double fsum = 0.0;
  for (double f : params_.offer_probs) fsum += f;
  for (double& f : params_.offer_probs) f /= fsum;

  // Objective benchmark: same stopping problem, with the compound
  // probability of finding a fresh job in place of theta * (1 - gamma_bar).
  w_star_ = stop_root(params_.delta * (lambda_bar_ - joint_mean_));

  // Self-confirming threshold: the wage must be optimal under the arrival
  // rate fitted to the time series that the threshold itself generates.
  auto mapped = [&](double w) {
    return reservation_wage(fitted_theta(unemployed_share(w)));
  };
  double lo = 0.0;
  double hi = params_.wages.back();
  if (mapped(hi) - hi > 0.0) {
    std::ostringstream msg;
    msg << "search: threshold map has no fixed point in [0," << hi
        << "]; map(hi)=" << mapped(hi);
    throw std::runtime_error(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mapped(mid) - mid > 0.0 ? lo : hi) = mid;
  }
  w_fitted_ = 0.5 * (lo + hi);
  theta_fitted_ = fitted_theta(unemployed_share(w_fitted_));
}

double SearchOracle::expected_gain(double v) const {
  double acc = 0.0;
  for (size_t j = 1; j < params_.wages.size(); ++j) {
    const double w = params_.wages[j];
    if (w > v) acc += params_.offer_probs[j - 1] * (w - v);
  }
  return acc;
}

double SearchOracle::stop_root(double coef) const {
  // Unique v with v * (1 - delta + delta * gamma_bar) = coef * E(w - v)+;
  // the left side rises and the right side falls in v.
  const double slope = 1.0 - params_.delta + params_.delta * gamma_bar_;
  double lo = 0.0;
  double hi = params_.wages.back();
  auto g = [&](double v) { return coef * expected_gain(v) - v * slope; };
  if (g(lo) < 0.0 || g(hi) > 0.0) {
    std::ostringstream msg;
    msg << "search: stopping equation not bracketed on [" << lo << "," << hi
        << "]: g(lo)=" << g(lo) << " g(hi)=" << g(hi);
    throw std::runtime_error(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double SearchOracle::reservation_wage(double theta) const {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("search: arrival rate must lie in [0,1]");
  }
  return stop_root(params_.delta * theta * (1.0 - gamma_bar_));
}

double SearchOracle::fitted_theta(double m_unemployed) const {
  if (!(m_unemployed >= 0.0 && m_unemployed <= 1.0)) {
    throw std::invalid_argument("search: unemployed share must lie in [0,1]");
  }
  const double m1 = 1.0 - m_unemployed;
  return (joint_mean_ * m1 + lambda_bar_ * m_unemployed) /
         (gamma_bar_ * m1 + m_unemployed);
}

double SearchOracle::unemployed_share(double w) const {
  double accept = 0.0;
  for (size_t j = 1; j < params_.wages.size(); ++j) {
    if (params_.wages[j] >= w - 1e-12) accept += params_.offer_probs[j - 1];
  }
  // Flow balance between time employed and time searching under the
  // threshold; accept is the chance a fresh draw clears it.
  return (gamma_bar_ - accept * joint_mean_) /
         (accept * (lambda_bar_ - joint_mean_) + gamma_bar_);
}

SearchOracle search_oracle(const SearchParams& p) { return SearchOracle(p); }

}  // namespace berknash::examples
