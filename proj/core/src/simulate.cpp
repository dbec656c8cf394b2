#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "berknash/learning.hpp"
#include "berknash/mdp.hpp"

namespace berknash {

namespace {

constexpr double kLikelihoodFloor = 1e-300;

/// Uniform draw in [0, 1) built directly from the generator output so the
/// stream does not depend on library distribution internals.
double u01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

int draw_state(std::mt19937_64& rng, const Vector& weights) {
  const double u = u01(rng) * weights.sum();
  double acc = 0.0;
  int last = 0;
  for (Eigen::Index s = 0; s < weights.size(); ++s) {
    if (weights[s] <= 0.0) continue;
    acc += weights[s];
    last = int(s);
    if (u < acc) return last;
  }
  return last;
}

int draw_action(std::mt19937_64& rng, const FiniteMdp& mdp,
                const Strategy& sigma, int s) {
  const auto& acts = mdp.feasible(s);
  double total = 0.0;
  for (int a : acts) total += std::max(0.0, sigma.probs[mdp.pair_index(s, a)]);
  const double u = u01(rng) * total;
  double acc = 0.0;
  int last = acts.front();
  for (int a : acts) {
    const double w = std::max(0.0, sigma.probs[mdp.pair_index(s, a)]);
    if (w <= 0.0) continue;
    acc += w;
    last = a;
    if (u < acc) return last;
  }
  return last;
}

void uniform_over_band(const FiniteMdp& mdp, const Vector& value_by_pair,
                       Strategy& sigma) {
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& acts = mdp.feasible(s);
    double best = -kDivergenceInfinity;
    for (int a : acts) {
      best = std::max(best, value_by_pair[mdp.pair_index(s, a)]);
    }
    int hits = 0;
    for (int a : acts) {
      const int p = mdp.pair_index(s, a);
      sigma.probs[p] =
          value_by_pair[p] >= best - kOptTol ? 1.0 : 0.0;
      hits += sigma.probs[p] > 0.0 ? 1 : 0;
    }
    for (int a : acts) sigma.probs[mdp.pair_index(s, a)] /= double(hits);
  }
}

void lowest_index_argmax(const FiniteMdp& mdp, const Vector& value_by_pair,
                         Strategy& sigma) {
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& acts = mdp.feasible(s);
    double best = -kDivergenceInfinity;
    for (int a : acts) {
      best = std::max(best, value_by_pair[mdp.pair_index(s, a)]);
    }
    int chosen = -1;
    for (int a : acts) {
      const int p = mdp.pair_index(s, a);
      sigma.probs[p] = 0.0;
      if (chosen < 0 && value_by_pair[p] >= best - kOptTol) chosen = a;
    }
    sigma.probs[mdp.pair_index(s, chosen)] = 1.0;
  }
}

BeliefGrid default_grid(int n_params) {
  for (int r = 100; r >= 1; --r) {
    double count = 1.0;
    for (int i = 1; i < n_params; ++i) {
      count *= double(r + i) / double(i);
      if (count > 250000.0) break;
    }
    if (count <= 250000.0) return BeliefGrid::regular(n_params, r);
  }
  return BeliefGrid::regular(n_params, 1);
}

}  // namespace

LearningTrace simulate(const FiniteSmdp& smdp, const Belief& prior,
                       PolicyMode policy, int64_t horizon, uint64_t seed,
                       const SimulateOptions& options) {
  const FiniteMdp& mdp = smdp.base;
  const int n_params = smdp.n_params();
  const int n_pairs = mdp.n_pairs();
  const int n_states = mdp.n_states();
  if (prior.weights.size() != n_params) {
    throw std::invalid_argument("prior length does not match the grid");
  }
  if (prior.weights.minCoeff() <= 0.0) {
    throw std::invalid_argument("prior must have full support");
  }
  if (horizon < 0) {
    throw std::invalid_argument("horizon must be nonnegative");
  }

  LearningTrace trace;
  trace.seed = seed;
  trace.policy = policy;
  trace.prior = prior;
  trace.prior.weights /= prior.weights.sum();
  trace.final_belief = trace.prior;
  if (horizon == 0) return trace;

  // Per-pair likelihood tables: like[p](k, s') = Q_theta_k(s' | pair p),
  // plus their logs. One pass up front keeps the per-period cost at dot
  // products and vector adds.
  if (double(n_params) * double(n_pairs) * double(n_states) > 1e8) {
    throw std::runtime_error(
        "kernel family is too large to tabulate for simulation");
  }
  std::vector<Matrix> like(static_cast<std::size_t>(n_pairs));
  std::vector<Matrix> loglike(static_cast<std::size_t>(n_pairs));
  Matrix reward(n_params, n_pairs);
  {
    Vector row(n_states);
    for (int p = 0; p < n_pairs; ++p) {
      like[size_t(p)].resize(n_params, n_states);
      for (int k = 0; k < n_params; ++k) {
        smdp.family->row(k, p, row);
        like[size_t(p)].row(k) = row.transpose();
        reward(k, p) = row.dot(mdp.payoff().row(p));
      }
      loglike[size_t(p)] = like[size_t(p)].array().log();
    }
  }

  BeliefGrid local_grid;
  const BeliefGrid* grid = options.grid;
  BeliefValue W;
  if (policy == PolicyMode::kBeliefOptimal) {
    if (grid == nullptr) {
      local_grid = default_grid(n_params);
      grid = &local_grid;
    }
    W = solve_belief_mdp(smdp, *grid, options.value_tol);
  }

  const int64_t record_width = 2 * n_pairs + n_params + 4;
  trace.dense = (horizon + 1) * record_width <= options.dense_budget;

  std::mt19937_64 rng(seed);
  int s = draw_state(rng, mdp.initial());
  // The authoritative belief state is the cumulative log-weight vector
  // (log prior plus summed log-likelihoods). Multiplying a probability
  // vector period by period rounds a sufficiently out-of-favor parameter
  // to exactly zero, and that path can never bring it back even when later
  // data favors it again. mu is the softmax of logw, maintained
  // multiplicatively for speed and recomputed exactly on a short cadence
  // and at every stored record; the cadence is far too short for a
  // parameter to climb from the underflow floor back to visible mass.
  Vector logw = trace.prior.weights.array().log();
  Vector mu = trace.prior.weights;
  Vector counts = Vector::Zero(n_pairs);
  Vector warm = Vector::Zero(n_states);
  Vector value_by_pair(n_pairs);
  Matrix mix_kernel(n_pairs, n_states);
  Strategy sigma;
  sigma.probs = Vector::Zero(n_pairs);

  trace.states.reserve(size_t(horizon));
  trace.actions.reserve(size_t(horizon));

  auto keep_record = [&](int64_t t) {
    if (trace.dense) return true;
    if (t == 0 || t >= horizon - options.tail_records) return true;
    int64_t mark = 100;
    while (mark < t) mark *= 10;
    return mark == t;
  };

  for (int64_t t = 0; t < horizon; ++t) {
    const bool keep = keep_record(t);
    if (keep || (t & 63) == 0) {
      mu = (logw.array() - logw.maxCoeff()).exp();
      mu /= mu.sum();
    }
    switch (policy) {
      case PolicyMode::kMyopic:
        for (int p = 0; p < n_pairs; ++p) {
          value_by_pair[p] = reward.col(p).dot(mu);
        }
        uniform_over_band(mdp, value_by_pair, sigma);
        break;
      case PolicyMode::kCertaintyEquivalent: {
        if (mdp.discount() == 0.0) {
          // No continuation value, so the q-values are just the expected
          // one-period payoffs; skip the kernel build entirely.
          for (int p = 0; p < n_pairs; ++p) {
            value_by_pair[p] = reward.col(p).dot(mu);
          }
          lowest_index_argmax(mdp, value_by_pair, sigma);
          break;
        }
        for (int p = 0; p < n_pairs; ++p) {
          mix_kernel.row(p) = (like[size_t(p)].transpose() * mu).transpose();
        }
        SolveOptions vi;
        vi.tol = options.value_tol;
        vi.kernel = &mix_kernel;
        vi.warm_start = &warm;
        const ValueFunction vf = value_iteration(mdp, vi);
        warm = vf.values;
        value_by_pair = q_values(mdp, vf.values, &mix_kernel);
        lowest_index_argmax(mdp, value_by_pair, sigma);
        break;
      }
      case PolicyMode::kBeliefOptimal: {
        Belief now{mu};
        for (int p = 0; p < n_pairs; ++p) {
          const Vector mix = like[size_t(p)].transpose() * mu;
          double total = 0.0;
          for (int sn = 0; sn < n_states; ++sn) {
            if (mix[sn] <= kLikelihoodFloor) continue;
            double cont = 0.0;
            if (mdp.discount() > 0.0) {
              const Belief post = bayes_update(
                  smdp, now, mdp.pair(p).state, mdp.pair(p).action, sn);
              for (const auto& [idx, weight] : W.grid.locate(post)) {
                cont += weight * W.values(sn, idx);
              }
            }
            total += mix[sn] *
                     (mdp.payoff()(p, sn) + mdp.discount() * cont);
          }
          value_by_pair[p] = total;
        }
        uniform_over_band(mdp, value_by_pair, sigma);
        break;
      }
    }

    const int x = draw_action(rng, mdp, sigma, s);
    const int p = mdp.pair_index(s, x);
    counts[p] += 1.0;
    trace.states.push_back(s);
    trace.actions.push_back(x);
    trace.periods = t + 1;

    if (keep) {
      TraceRecord rec;
      rec.t = t;
      rec.state = s;
      rec.action = x;
      rec.sigma = sigma;
      rec.m.weights = counts / double(t + 1);
      rec.mu.weights = mu;
      trace.records.push_back(std::move(rec));
    }

    const int s_next = draw_state(rng, mdp.kernel().row(p).transpose());
    const Vector lik = like[size_t(p)].col(s_next);
    const double denom = mu.dot(lik);
    if (denom <= kLikelihoodFloor) {
      trace.zero_likelihood = true;
      break;
    }
    logw += loglike[size_t(p)].col(s_next);
    mu = mu.cwiseProduct(lik) / denom;
    s = s_next;
  }

  Vector final_mu = (logw.array() - logw.maxCoeff()).exp();
  trace.final_belief.weights = final_mu / final_mu.sum();
  return trace;
}

}  // namespace berknash
