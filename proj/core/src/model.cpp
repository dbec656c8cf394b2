#include "berknash/model.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace berknash {

namespace {

void renormalize_near_one_rows(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double sum = rows.row(r).sum();
    if (sum != 1.0 && std::abs(sum - 1.0) <= kProbTol && sum > 0.0) {
      rows.row(r) /= sum;
    }
  }
}

}  // namespace

FiniteMdp::FiniteMdp(std::vector<std::string> state_names,
                     std::vector<std::string> action_names,
                     std::vector<std::vector<int>> feasible, Vector initial,
                     Matrix kernel, Matrix payoff, double discount)
    : state_names_(std::move(state_names)),
      action_names_(std::move(action_names)),
      feasible_(std::move(feasible)),
      initial_(std::move(initial)),
      kernel_(std::move(kernel)),
      payoff_(std::move(payoff)),
      discount_(discount) {
  const int ns = n_states();
  const int na = n_actions();
  if (ns == 0) throw std::invalid_argument("model needs at least one state");
  if (na == 0) throw std::invalid_argument("model needs at least one action");
  if (static_cast<int>(feasible_.size()) != ns)
    throw std::invalid_argument("feasible map size does not match states");
  for (int s = 0; s < ns; ++s) {
    auto& fs = feasible_[static_cast<size_t>(s)];
    if (fs.empty())
      throw std::invalid_argument("state '" +
                                  state_names_[static_cast<size_t>(s)] +
                                  "' has no feasible action");
    std::sort(fs.begin(), fs.end());
    for (int a : fs)
      if (a < 0 || a >= na)
        throw std::invalid_argument("feasible action index out of range");
    if (std::adjacent_find(fs.begin(), fs.end()) != fs.end())
      throw std::invalid_argument("duplicate feasible action");
  }
  if (initial_.size() != ns)
    throw std::invalid_argument("initial distribution size mismatch");
  pair_index_.assign(static_cast<size_t>(ns) * static_cast<size_t>(na), -1);
  for (int s = 0; s < ns; ++s) {
    for (int a : feasible_[static_cast<size_t>(s)]) {
      pair_index_[static_cast<size_t>(s * na + a)] =
          static_cast<int>(pairs_.size());
      pairs_.push_back({s, a});
    }
  }
  const auto np = static_cast<Eigen::Index>(pairs_.size());
  if (kernel_.rows() != np || kernel_.cols() != ns)
    throw std::invalid_argument("kernel must be (feasible pairs) x states");
  if (payoff_.rows() != np || payoff_.cols() != ns)
    throw std::invalid_argument("payoff must be (feasible pairs) x states");
  if (!(discount_ >= 0.0) || discount_ >= 1.0)
    throw std::invalid_argument("discount must lie in [0, 1)");
  renormalize_near_one_rows(kernel_);
  const double q0sum = initial_.sum();
  if (q0sum != 1.0 && std::abs(q0sum - 1.0) <= kProbTol && q0sum > 0.0)
    initial_ /= q0sum;
}

int FiniteMdp::state_index(const std::string& name) const {
  for (int s = 0; s < n_states(); ++s)
    if (state_names_[static_cast<size_t>(s)] == name) return s;
  return -1;
}

int FiniteMdp::action_index(const std::string& name) const {
  for (int a = 0; a < n_actions(); ++a)
    if (action_names_[static_cast<size_t>(a)] == name) return a;
  return -1;
}

double FiniteMdp::payoff_bound() const {
  return payoff_.size() == 0 ? 0.0 : payoff_.cwiseAbs().maxCoeff();
}

Strategy uniform_strategy(const FiniteMdp& mdp) {
  Strategy sigma;
  sigma.probs.resize(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& fs = mdp.feasible(s);
    const double w = 1.0 / static_cast<double>(fs.size());
    for (int a : fs) sigma.probs[mdp.pair_index(s, a)] = w;
  }
  return sigma;
}

Strategy pure_strategy(const FiniteMdp& mdp, const std::vector<int>& action) {
  if (static_cast<int>(action.size()) != mdp.n_states())
    throw std::invalid_argument("need one action per state");
  Strategy sigma;
  sigma.probs = Vector::Zero(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const int p = mdp.pair_index(s, action[static_cast<size_t>(s)]);
    if (p < 0)
      throw std::invalid_argument("pure strategy picks an infeasible action");
    sigma.probs[p] = 1.0;
  }
  return sigma;
}

bool strategy_is_valid(const FiniteMdp& mdp, const Strategy& sigma,
                       double tol) {
  if (sigma.probs.size() != mdp.n_pairs()) return false;
  if ((sigma.probs.array() < -tol).any()) return false;
  for (int s = 0; s < mdp.n_states(); ++s) {
    double sum = 0.0;
    for (int a : mdp.feasible(s)) sum += sigma.probs[mdp.pair_index(s, a)];
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

Strategy normalize_strategy(const FiniteMdp& mdp, Strategy sigma) {
  for (int s = 0; s < mdp.n_states(); ++s) {
    double sum = 0.0;
    for (int a : mdp.feasible(s)) {
      const int p = mdp.pair_index(s, a);
      sigma.probs[p] = std::max(0.0, sigma.probs[p]);
      sum += sigma.probs[p];
    }
    if (sum <= 0.0)
      throw std::invalid_argument("strategy has no mass at state '" +
                                  mdp.state_names()[static_cast<size_t>(s)] +
                                  "'");
    for (int a : mdp.feasible(s)) sigma.probs[mdp.pair_index(s, a)] /= sum;
  }
  return sigma;
}

double KernelFamily::pair_divergence(const Matrix& true_kernel, int p,
                                     int k) const {
  Vector q_model(true_kernel.cols());
  row(k, p, q_model);
  double acc = 0.0;
  for (Eigen::Index s = 0; s < true_kernel.cols(); ++s) {
    const double q = true_kernel(p, s);
    if (q <= 0.0) continue;  // 0 * ln(0 / x) = 0
    const double qm = q_model[s];
    if (qm <= 0.0) return kDivergenceInfinity;
    acc += q * std::log(q / qm);
  }
  return acc;
}

void KernelFamily::mixture_row(const Vector& mu, int p,
                               Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  Vector tmp(out.size());
  for (int k = 0; k < size(); ++k) {
    const double w = mu[k];
    if (w <= 0.0) continue;
    row(k, p, tmp);
    out += w * tmp;
  }
}

bool KernelFamily::batched_divergence(const Matrix&, const Vector&,
                                      Vector&) const {
  return false;
}

Matrix KernelFamily::parameter_matrix() const {
  Matrix out(size(), param_dim());
  for (int k = 0; k < size(); ++k) out.row(k) = parameter(k);
  return out;
}

DenseFamily::DenseFamily(Matrix parameters, std::vector<Matrix> kernels)
    : parameters_(std::move(parameters)), kernels_(std::move(kernels)) {
  if (static_cast<size_t>(parameters_.rows()) != kernels_.size())
    throw std::invalid_argument("one parameter row per kernel required");
  if (kernels_.empty())
    throw std::invalid_argument("family needs at least one grid point");
  for (auto& k : kernels_) {
    if (k.rows() != kernels_.front().rows() ||
        k.cols() != kernels_.front().cols())
      throw std::invalid_argument("family kernels must share a shape");
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
      const double sum = k.row(r).sum();
      if (sum != 1.0 && std::abs(sum - 1.0) <= kProbTol && sum > 0.0)
        k.row(r) /= sum;
    }
  }
}

void DenseFamily::row(int k, int p, Eigen::Ref<Eigen::VectorXd> out) const {
  out = kernels_[static_cast<size_t>(k)].row(p);
}

double DenseFamily::pair_divergence(const Matrix& true_kernel, int p,
                                    int k) const {
  const Matrix& qk = kernels_[static_cast<size_t>(k)];
  double acc = 0.0;
  for (Eigen::Index s = 0; s < true_kernel.cols(); ++s) {
    const double q = true_kernel(p, s);
    if (q <= 0.0) continue;
    const double qm = qk(p, s);
    if (qm <= 0.0) return kDivergenceInfinity;
    acc += q * std::log(q / qm);
  }
  return acc;
}

void DenseFamily::mixture_row(const Vector& mu, int p,
                              Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  for (int k = 0; k < size(); ++k) {
    const double w = mu[k];
    if (w <= 0.0) continue;
    out += w * kernels_[static_cast<size_t>(k)].row(p).transpose();
  }
}

Belief uniform_belief(const FiniteSmdp& smdp) {
  Belief mu;
  mu.weights =
      Vector::Constant(smdp.n_params(), 1.0 / double(smdp.n_params()));
  return mu;
}

Belief point_mass_belief(const FiniteSmdp& smdp, int k) {
  Belief mu;
  mu.weights = Vector::Zero(smdp.n_params());
  mu.weights[k] = 1.0;
  return mu;
}

Matrix mixture_kernel(const FiniteSmdp& smdp, const Belief& mu) {
  if (!smdp.family) throw std::invalid_argument("smdp has no family");
  if (mu.weights.size() != smdp.n_params())
    throw std::invalid_argument("belief size does not match grid");
  Matrix out(smdp.base.n_pairs(), smdp.base.n_states());
  Vector row(smdp.base.n_states());
  for (int p = 0; p < smdp.base.n_pairs(); ++p) {
    smdp.family->mixture_row(mu.weights, p, row);
    out.row(p) = row.transpose();
  }
  return out;
}

std::vector<Vector> make_uniform_grid(const std::vector<double>& lo,
                                      const std::vector<double>& hi,
                                      const std::vector<int>& counts) {
  const size_t d = lo.size();
  if (hi.size() != d || counts.size() != d)
    throw std::invalid_argument("grid spec dimensions disagree");
  size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("grid counts must be >= 1");
    total *= static_cast<size_t>(c);
  }
  std::vector<Vector> points;
  points.reserve(total);
  std::vector<int> idx(d, 0);
  for (size_t n = 0; n < total; ++n) {
    Vector pt(static_cast<Eigen::Index>(d));
    for (size_t j = 0; j < d; ++j) {
      const int c = counts[j];
      pt[static_cast<Eigen::Index>(j)] =
          c == 1 ? lo[j]
                 : lo[j] + (hi[j] - lo[j]) * double(idx[j]) / double(c - 1);
    }
    points.push_back(std::move(pt));
    for (size_t j = d; j-- > 0;) {
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
    }
  }
  return points;
}

}  // namespace berknash
