#include "berknash/mdp.hpp"

#include <stdexcept>

namespace berknash {

namespace {

const Matrix& kernel_or_default(const FiniteMdp& mdp, const Matrix* kernel) {
  if (!kernel) return mdp.kernel();
  if (kernel->rows() != mdp.n_pairs() || kernel->cols() != mdp.n_states())
    throw std::invalid_argument("kernel override shape mismatch");
  return *kernel;
}

// Expected one-period payoff of each pair under the given kernel.
Vector expected_payoffs(const FiniteMdp& mdp, const Matrix& kernel) {
  return kernel.cwiseProduct(mdp.payoff()).rowwise().sum();
}

}  // namespace

ValueFunction value_iteration(const FiniteMdp& mdp, const SolveOptions& opts) {
  const Matrix& kernel = kernel_or_default(mdp, opts.kernel);
  const double delta = mdp.discount();
  if (!(delta >= 0.0) || delta >= 1.0)
    throw std::invalid_argument("value iteration needs discount in [0, 1)");
  const Vector reward = expected_payoffs(mdp, kernel);

  ValueFunction out;
  out.values = opts.warm_start ? *opts.warm_start
                               : Vector::Zero(mdp.n_states()).eval();
  if (out.values.size() != mdp.n_states())
    throw std::invalid_argument("warm start size mismatch");

  const double stop =
      delta == 0.0 ? std::numeric_limits<double>::infinity()
                   : opts.tol * (1.0 - delta) / (2.0 * delta);
  Vector next(mdp.n_states());
  Vector q(mdp.n_pairs());
  while (true) {
    q.noalias() = kernel * out.values;
    q = reward + delta * q;
    for (int s = 0; s < mdp.n_states(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a : mdp.feasible(s)) best = std::max(best, q[mdp.pair_index(s, a)]);
      next[s] = best;
    }
    out.residual = (next - out.values).cwiseAbs().maxCoeff();
    out.values.swap(next);
    ++out.sweeps;
    if (delta == 0.0 || out.residual <= stop) break;
    if (out.sweeps >= opts.max_sweeps)
      throw std::runtime_error("value iteration failed to converge");
  }
  return out;
}

Vector q_values(const FiniteMdp& mdp, const Vector& v, const Matrix* kernel) {
  const Matrix& k = kernel_or_default(mdp, kernel);
  if (v.size() != mdp.n_states())
    throw std::invalid_argument("value vector size mismatch");
  Vector q = k * v;
  return expected_payoffs(mdp, k) + mdp.discount() * q;
}

OptimalActionSets optimal_action_sets(const FiniteMdp& mdp, const Vector& q,
                                      double tol) {
  if (q.size() != mdp.n_pairs())
    throw std::invalid_argument("action-value vector size mismatch");
  OptimalActionSets out;
  out.tol = tol;
  out.actions.resize(static_cast<size_t>(mdp.n_states()));
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a : mdp.feasible(s)) best = std::max(best, q[mdp.pair_index(s, a)]);
    for (int a : mdp.feasible(s))
      if (q[mdp.pair_index(s, a)] >= best - tol)
        out.actions[static_cast<size_t>(s)].push_back(a);
  }
  return out;
}

OptimalityCheck is_optimal(const FiniteMdp& mdp, const Strategy& sigma,
                           double tol, const Matrix* kernel, const Vector* q) {
  if (sigma.probs.size() != mdp.n_pairs())
    throw std::invalid_argument("strategy size mismatch");
  Vector qv;
  if (q) {
    qv = *q;
  } else {
    const ValueFunction vf =
        value_iteration(mdp, {.tol = tol * 1e-3, .kernel = kernel});
    qv = q_values(mdp, vf.values, kernel);
  }
  OptimalityCheck out;
  out.optimal = true;
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a : mdp.feasible(s)) best = std::max(best, qv[mdp.pair_index(s, a)]);
    for (int a : mdp.feasible(s)) {
      const int p = mdp.pair_index(s, a);
      if (sigma.probs[p] > 0.0) {
        const double shortfall = best - qv[p];
        out.worst_shortfall = std::max(out.worst_shortfall, shortfall);
        if (shortfall > tol) out.optimal = false;
      }
    }
  }
  return out;
}

Vector policy_evaluation(const FiniteMdp& mdp, const Strategy& sigma,
                         const Matrix* kernel) {
  const Matrix& k = kernel_or_default(mdp, kernel);
  if (sigma.probs.size() != mdp.n_pairs())
    throw std::invalid_argument("strategy size mismatch");
  const int ns = mdp.n_states();
  Matrix transition = Matrix::Zero(ns, ns);
  Vector reward = Vector::Zero(ns);
  const Vector pair_reward = expected_payoffs(mdp, k);
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    const auto& pr = mdp.pair(p);
    const double w = sigma.probs[p];
    if (w == 0.0) continue;
    transition.row(pr.state) += w * k.row(p);
    reward[pr.state] += w * pair_reward[p];
  }
  Matrix lhs = Matrix::Identity(ns, ns) - mdp.discount() * transition;
  return lhs.partialPivLu().solve(reward);
}

}  // namespace berknash
