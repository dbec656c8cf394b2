#include "berknash/chain.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace berknash {

namespace {

constexpr double kStationaryResidualTol = 1e-10;

const Matrix& kernel_or_default(const FiniteMdp& mdp, const Matrix* kernel) {
  if (kernel == nullptr) return mdp.kernel();
  if (kernel->rows() != mdp.n_pairs() || kernel->cols() != mdp.n_states()) {
    throw std::invalid_argument("kernel override has wrong shape");
  }
  return *kernel;
}

}  // namespace

OutcomeKernel::OutcomeKernel(const FiniteMdp& mdp, Strategy sigma,
                             const Matrix* kernel)
    : mdp_(&mdp), kernel_(&kernel_or_default(mdp, kernel)),
      sigma_(std::move(sigma)) {
  if (!strategy_is_valid(mdp, sigma_)) {
    throw std::invalid_argument("strategy is not a valid behavior profile");
  }
  normalize_strategy(mdp, sigma_);
  const int ns = mdp.n_states();
  state_chain_.setZero(ns, ns);
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    const auto& pair = mdp.pair(p);
    state_chain_.row(pair.state) += sigma_.probs[p] * kernel_->row(p);
  }
}

Vector OutcomeKernel::apply(const Vector& m) const {
  if (m.size() != mdp_->n_pairs()) {
    throw std::invalid_argument("outcome vector has wrong length");
  }
  // Push mass through the kernel to get the next state marginal, then split
  // each state's mass across actions by the strategy.
  Vector next_state = Vector::Zero(mdp_->n_states());
  for (int p = 0; p < mdp_->n_pairs(); ++p) {
    if (m[p] != 0.0) next_state += m[p] * kernel_->row(p).transpose();
  }
  Vector out(mdp_->n_pairs());
  for (int p = 0; p < mdp_->n_pairs(); ++p) {
    out[p] = sigma_.probs[p] * next_state[mdp_->pair(p).state];
  }
  return out;
}

double OutcomeKernel::entry(int from_pair, int to_pair) const {
  const auto& to = mdp_->pair(to_pair);
  return sigma_.probs[to_pair] * (*kernel_)(from_pair, to.state);
}

Matrix OutcomeKernel::dense() const {
  const int np = mdp_->n_pairs();
  Matrix out(np, np);
  for (int p = 0; p < np; ++p) {
    for (int q = 0; q < np; ++q) out(p, q) = entry(p, q);
  }
  return out;
}

std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> index(n, -1);
  std::vector<int> low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int next_index = 0;

  // Iterative Tarjan; frames carry the next child position so deep chains do
  // not overflow the call stack.
  struct Frame {
    int vertex;
    std::size_t child;
  };
  std::vector<Frame> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.push_back({root, 0});
    while (!frames.empty()) {
      Frame& f = frames.back();
      const int v = f.vertex;
      if (f.child == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (f.child < adjacency[v].size()) {
        const int w = adjacency[v][f.child++];
        if (index[w] == -1) {
          frames.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<int> component;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component.push_back(w);
        } while (w != v);
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
      }
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().vertex;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return components;
}

namespace {

/// Stationary row vector of the restriction of P to the given closed class.
/// Solves the balance equations with one row swapped for normalization and
/// falls back to damped power iteration when the solve looks unreliable.
Vector class_stationary(const Matrix& P, const std::vector<int>& cls) {
  const int k = static_cast<int>(cls.size());
  if (k == 1) return Vector::Ones(1);
  Matrix sub(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) sub(i, j) = P(cls[i], cls[j]);
  }
  Matrix A = sub.transpose() - Matrix::Identity(k, k);
  A.row(k - 1).setOnes();
  Vector b = Vector::Zero(k);
  b[k - 1] = 1.0;
  Vector nu = A.partialPivLu().solve(b);

  auto residual = [&](const Vector& v) {
    return (v.transpose() * sub - v.transpose()).cwiseAbs().maxCoeff();
  };
  bool good = nu.allFinite() && nu.minCoeff() > -1e-12 &&
              residual(nu) <= kStationaryResidualTol;
  if (!good) {
    // Damping halves the modulus of any eigenvalue at -1, so the iteration
    // converges even on periodic classes.
    nu = Vector::Constant(k, 1.0 / k);
    for (int it = 0; it < 500000; ++it) {
      Vector next = 0.5 * nu + 0.5 * (sub.transpose() * nu);
      next /= next.sum();
      const double change = (next - nu).cwiseAbs().maxCoeff();
      nu.swap(next);
      if (change <= 1e-15) break;
    }
    if (residual(nu) > kStationaryResidualTol) {
      throw std::runtime_error(
          "stationary distribution solve failed to reach residual tolerance");
    }
  }
  nu = nu.cwiseMax(0.0);
  nu /= nu.sum();
  return nu;
}

}  // namespace

StationarySet stationary_set(const FiniteMdp& mdp, const Strategy& sigma,
                             const Matrix* kernel) {
  OutcomeKernel M(mdp, sigma, kernel);
  const Matrix& P = M.state_chain();
  const int ns = mdp.n_states();

  std::vector<std::vector<int>> adjacency(ns);
  for (int s = 0; s < ns; ++s) {
    for (int t = 0; t < ns; ++t) {
      if (P(s, t) > 0.0) adjacency[s].push_back(t);
    }
  }
  auto components = strongly_connected_components(adjacency);

  std::vector<int> component_of(ns, -1);
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (int v : components[c]) component_of[v] = static_cast<int>(c);
  }

  StationarySet out;
  std::vector<bool> recurrent(ns, false);
  for (const auto& cls : components) {
    bool closed = true;
    for (int v : cls) {
      for (int w : adjacency[v]) {
        if (component_of[w] != component_of[v]) {
          closed = false;
          break;
        }
      }
      if (!closed) break;
    }
    if (!closed) continue;
    Vector nu = class_stationary(P, cls);
    OutcomeDistribution m;
    m.weights = Vector::Zero(mdp.n_pairs());
    for (int i = 0; i < static_cast<int>(cls.size()); ++i) {
      const int s = cls[i];
      recurrent[s] = true;
      for (int x : mdp.feasible(s)) {
        const int p = mdp.pair_index(s, x);
        m.weights[p] = nu[i] * M.strategy().probs[p];
      }
    }
    out.extremes.push_back(std::move(m));
    out.recurrent_classes.push_back(cls);
  }
  for (int s = 0; s < ns; ++s) {
    if (!recurrent[s]) out.transient_states.push_back(s);
  }
  return out;
}

bool full_communication(const FiniteMdp& mdp, const Matrix* kernel) {
  const Matrix& Q = kernel_or_default(mdp, kernel);
  const int ns = mdp.n_states();
  std::vector<std::vector<int>> adjacency(ns);
  for (int s = 0; s < ns; ++s) {
    std::vector<bool> seen(ns, false);
    for (int x : mdp.feasible(s)) {
      const int p = mdp.pair_index(s, x);
      for (int t = 0; t < ns; ++t) {
        if (Q(p, t) > 0.0 && !seen[t]) {
          seen[t] = true;
          adjacency[s].push_back(t);
        }
      }
    }
  }
  auto components = strongly_connected_components(adjacency);
  return components.size() == 1 &&
         static_cast<int>(components.front().size()) == ns;
}

bool support_is_full(const OutcomeDistribution& m) {
  if (m.weights.size() == 0) return false;
  return m.weights.minCoeff() > 0.0;
}

}  // namespace berknash
