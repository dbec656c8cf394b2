#include "berknash/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "berknash/chain.hpp"
#include "berknash/divergence.hpp"
#include "berknash/mdp.hpp"
#include "berknash/runtime.hpp"

namespace berknash {

namespace {

constexpr double kSupportFloor = 1e-12;
constexpr double kMixtureViTol = 1e-12;

double linf(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Mixture kernel accumulated over the support of mu only; beliefs inside
/// the search keep small supports, so this avoids touching the whole grid.
Matrix support_mixture(const FiniteSmdp& smdp, const Vector& mu) {
  const FiniteMdp& mdp = smdp.base;
  Matrix out(mdp.n_pairs(), mdp.n_states());
  const double total = mu.sum();
  Vector weights = mu;
  if (total > 0.0 && std::abs(total - 1.0) > 1e-15) weights /= total;
  Vector row(mdp.n_states());
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    smdp.family->mixture_row(weights, p, row);
    out.row(p) = row.transpose();
  }
  return out;
}

const OutcomeDistribution& nearest_extreme(const StationarySet& ss,
                                           const Vector& target) {
  if (ss.extremes.empty()) {
    throw std::runtime_error("chain has no stationary distribution");
  }
  if (target.size() == 0) return ss.extremes.front();
  std::size_t best = 0;
  double best_dist = kDivergenceInfinity;
  for (std::size_t i = 0; i < ss.extremes.size(); ++i) {
    const double d = linf(ss.extremes[i].weights, target);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return ss.extremes[best];
}

/// Temperature-smoothed greedy strategy. Temperature 0 (or effectively 0
/// through underflow) mixes uniformly over the near-optimal set.
Strategy softmax_strategy(const FiniteMdp& mdp, const Vector& q,
                          double temperature, double opt_tol) {
  Strategy sigma;
  sigma.probs = Vector::Zero(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& acts = mdp.feasible(s);
    double best = -kDivergenceInfinity;
    for (int a : acts) best = std::max(best, q[mdp.pair_index(s, a)]);
    double sum = 0.0;
    for (int a : acts) {
      const int p = mdp.pair_index(s, a);
      double w;
      if (temperature > 0.0) {
        w = std::exp((q[p] - best) / temperature);
      } else {
        w = (q[p] >= best - opt_tol) ? 1.0 : 0.0;
      }
      sigma.probs[p] = w;
      sum += w;
    }
    if (sum <= 0.0) {
      // Every weight underflowed; fall back to the near-optimal set.
      for (int a : acts) {
        const int p = mdp.pair_index(s, a);
        sigma.probs[p] = (q[p] >= best - opt_tol) ? 1.0 : 0.0;
        sum += sigma.probs[p];
      }
    }
    for (int a : acts) sigma.probs[mdp.pair_index(s, a)] /= sum;
  }
  return sigma;
}

/// Belief restricted to the given atoms, keeping relative weights; falls
/// back to uniform over the atoms when almost no mass survives.
Belief restrict_belief(const Vector& mu, const std::vector<int>& keep,
                       int n_params) {
  Belief out;
  out.weights = Vector::Zero(n_params);
  double mass = 0.0;
  for (int k : keep) {
    out.weights[k] = std::max(0.0, mu[k]);
    mass += out.weights[k];
  }
  if (mass < kSupportFloor) {
    out.weights.setZero();
    for (int k : keep) out.weights[k] = 1.0 / double(keep.size());
  } else {
    out.weights /= mass;
  }
  return out;
}

/// Worst payoff shortfall among actions played above the floor, measured
/// against the best feasible action at each state.
double shortfall_above_floor(const FiniteMdp& mdp, const Strategy& sigma,
                             const Vector& q, double threshold) {
  double worst = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = -kDivergenceInfinity;
    for (int a : mdp.feasible(s)) {
      best = std::max(best, q[mdp.pair_index(s, a)]);
    }
    for (int a : mdp.feasible(s)) {
      const int p = mdp.pair_index(s, a);
      if (sigma.probs[p] > threshold) {
        worst = std::max(worst, best - q[p]);
      }
    }
  }
  return worst;
}

bool sums_to_one_per_state(const FiniteMdp& mdp, const Vector& probs,
                           double tol) {
  for (int s = 0; s < mdp.n_states(); ++s) {
    double sum = 0.0;
    double least = 0.0;
    for (int a : mdp.feasible(s)) {
      const double v = probs[mdp.pair_index(s, a)];
      sum += v;
      least = std::min(least, v);
    }
    if (std::abs(sum - 1.0) > tol || least < -tol) return false;
  }
  return true;
}

}  // namespace

Strategy clip_to_floor(const FiniteMdp& mdp, Strategy sigma, double epsilon) {
  if (epsilon <= 0.0) return normalize_strategy(mdp, std::move(sigma));
  sigma = normalize_strategy(mdp, std::move(sigma));
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& acts = mdp.feasible(s);
    if (epsilon * double(acts.size()) > 1.0 + 1e-15) {
      throw std::invalid_argument("floor " + std::to_string(epsilon) +
                                  " is infeasible at state '" +
                                  mdp.state_names()[size_t(s)] + "'");
    }
    // Water-filling: pin the actions that would end below the floor and
    // split the remaining budget proportionally among the rest. Each round
    // can only pin more actions, so this terminates.
    std::vector<char> pinned(acts.size(), 0);
    while (true) {
      double budget = 1.0;
      double free_mass = 0.0;
      for (std::size_t i = 0; i < acts.size(); ++i) {
        const double v = sigma.probs[mdp.pair_index(s, acts[i])];
        if (pinned[i]) {
          budget -= epsilon;
        } else {
          free_mass += std::max(0.0, v);
        }
      }
      bool changed = false;
      for (std::size_t i = 0; i < acts.size(); ++i) {
        if (pinned[i]) continue;
        const double v = std::max(
            0.0, sigma.probs[mdp.pair_index(s, acts[i])]);
        const double scaled = free_mass > 0.0 ? budget * v / free_mass
                                              : budget / 1e300;
        if (free_mass <= 0.0 || scaled < epsilon) {
          pinned[i] = 1;
          changed = true;
        }
      }
      if (!changed) {
        for (std::size_t i = 0; i < acts.size(); ++i) {
          const int p = mdp.pair_index(s, acts[i]);
          if (pinned[i]) {
            sigma.probs[p] = epsilon;
          } else {
            const double v = std::max(0.0, sigma.probs[p]);
            sigma.probs[p] = budget * v / free_mass;
          }
        }
        break;
      }
    }
  }
  return sigma;
}

bool exhaustive_learning_check(const FiniteSmdp& smdp, const Belief& mu,
                               double tol) {
  const FiniteMdp& mdp = smdp.base;
  if (mu.weights.size() != smdp.n_params()) {
    throw std::invalid_argument("belief size does not match grid");
  }
  std::vector<int> support;
  for (int k = 0; k < smdp.n_params(); ++k) {
    if (mu.weights[k] > kSupportFloor) support.push_back(k);
  }
  if (support.size() <= 1) return true;
  Vector mix(mdp.n_states());
  Vector lo(mdp.n_states());
  Vector hi(mdp.n_states());
  Vector row(mdp.n_states());
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    mix.setZero();
    lo.setConstant(kDivergenceInfinity);
    hi.setConstant(-kDivergenceInfinity);
    double mass = 0.0;
    for (int k : support) {
      smdp.family->row(k, p, row);
      mix += mu.weights[k] * row;
      mass += mu.weights[k];
      lo = lo.cwiseMin(row);
      hi = hi.cwiseMax(row);
    }
    mix /= mass;
    for (int s = 0; s < mdp.n_states(); ++s) {
      if (mix[s] > tol && hi[s] - lo[s] > tol) return false;
    }
  }
  return true;
}

EquilibriumCertificate verify(const FiniteSmdp& smdp, const Strategy& sigma,
                              const OutcomeDistribution& m, const Belief& mu,
                              const VerifyOptions& opts) {
  const FiniteMdp& mdp = smdp.base;
  if (sigma.probs.size() != mdp.n_pairs() ||
      m.weights.size() != mdp.n_pairs() ||
      mu.weights.size() != smdp.n_params()) {
    throw std::invalid_argument("certificate component has wrong length");
  }

  EquilibriumCertificate cert;
  cert.sigma = sigma;
  cert.m = m;
  cert.mu = mu;
  cert.tolerances = opts;
  cert.epsilon = opts.epsilon;

  const bool sigma_ok = sums_to_one_per_state(mdp, sigma.probs, 1e-9);
  const double m_sum = m.weights.sum();
  const bool m_ok = std::abs(m_sum - 1.0) <= 1e-9 &&
                    m.weights.minCoeff() >= -1e-9;
  const double mu_sum = mu.weights.sum();
  const bool mu_ok = std::abs(mu_sum - 1.0) <= 1e-9 &&
                     mu.weights.minCoeff() >= -1e-9;

  if (sigma_ok && m_ok) {
    OutcomeKernel M(mdp, sigma);
    Vector mw = m.weights / m_sum;
    cert.residual_stationarity = linf(M.apply(mw), mw);
  }

  std::vector<int> minimizers;
  if (m_ok) {
    OutcomeDistribution mn;
    mn.weights = (m.weights / m_sum).cwiseMax(0.0);
    DivergenceProfile prof = divergence_profile(smdp, mn, opts.wkld_tol);
    minimizers = prof.minimizers;
    if (mu_ok) {
      double outside = 0.0;
      std::vector<char> in_set(size_t(smdp.n_params()), 0);
      for (int k : minimizers) in_set[size_t(k)] = 1;
      for (int k = 0; k < smdp.n_params(); ++k) {
        if (!in_set[size_t(k)]) outside += std::max(0.0, mu.weights[k]);
      }
      cert.residual_belief = outside / mu_sum;
    }
  }

  if (sigma_ok && mu_ok) {
    Vector mun = mu.weights.cwiseMax(0.0);
    mun /= mun.sum();
    const Matrix mix = support_mixture(smdp, mun);
    try {
      SolveOptions vi;
      vi.tol = kMixtureViTol;
      vi.kernel = &mix;
      const ValueFunction vf = value_iteration(mdp, vi);
      const Vector q = q_values(mdp, vf.values, &mix);
      const double threshold =
          opts.epsilon > 0.0 ? opts.epsilon + 1e-9 : kProbTol;
      cert.residual_optimality =
          shortfall_above_floor(mdp, sigma, q, threshold);
    } catch (const std::runtime_error&) {
      // leave the optimality residual at infinity
    }
    cert.exhaustive_learning =
        exhaustive_learning_check(smdp, Belief{mun}, 1e-9);
  }

  return cert;
}

BestResponse best_response_map(const FiniteSmdp& smdp, const Strategy& sigma,
                               const OutcomeDistribution& m, const Belief& mu,
                               double temperature) {
  if (temperature < 0.0) {
    throw std::invalid_argument("temperature must be nonnegative");
  }
  const FiniteMdp& mdp = smdp.base;
  BestResponse out;

  const Matrix mix = support_mixture(smdp, mu.weights);
  SolveOptions vi;
  vi.tol = kMixtureViTol;
  vi.kernel = &mix;
  const ValueFunction vf = value_iteration(mdp, vi);
  const Vector q = q_values(mdp, vf.values, &mix);
  out.sigma = softmax_strategy(mdp, q, temperature, kOptTol);

  const StationarySet ss = stationary_set(mdp, sigma);
  out.m = nearest_extreme(ss, m.weights);

  const DivergenceProfile prof = divergence_profile(smdp, m);
  if (prof.minimizers.empty()) {
    out.mu = mu;  // nothing fits; leave the belief alone
  } else {
    out.mu = restrict_belief(mu.weights, prof.minimizers, smdp.n_params());
  }
  return out;
}

namespace {

struct JobSpec {
  StartPoint start;
  bool iterate = true;
  bool is_random = false;
};

class Search {
 public:
  Search(const FiniteSmdp& smdp, const FindConfig& cfg)
      : smdp_(smdp), cfg_(cfg), mdp_(smdp.base), table_(smdp, cfg.threads) {}

  std::vector<EquilibriumCertificate> run() {
    const std::vector<JobSpec> jobs = make_jobs();
    const uint64_t base =
        cfg_.seed != 0 ? cfg_.seed : instance_hash(smdp_);
    std::vector<std::vector<EquilibriumCertificate>> found(jobs.size());
    run_indexed_jobs(
        static_cast<int>(jobs.size()),
        [&](int j) {
          found[size_t(j)] =
              run_job(jobs[size_t(j)], derive_seed(base, uint64_t(j)));
        },
        cfg_.threads);
    std::vector<EquilibriumCertificate> out;
    for (auto& batch : found) {
      for (auto& cert : batch) {
        if (!cert.accepted()) continue;
        bool dup = false;
        for (const auto& kept : out) {
          if (linf(kept.sigma.probs, cert.sigma.probs) < cfg_.dedup_tol &&
              linf(kept.m.weights, cert.m.weights) < cfg_.dedup_tol) {
            dup = true;
            break;
          }
        }
        if (!dup) out.push_back(std::move(cert));
      }
    }
    return out;
  }

  /// Candidate-belief finalization shared with the refinement ladder.
  std::vector<EquilibriumCertificate> finalize_triple(const Strategy& sigma,
                                                      const Vector& m_hint,
                                                      const Vector& mu_hint) {
    return finalize(sigma, m_hint, mu_hint);
  }

 private:
  std::vector<JobSpec> make_jobs() const {
    std::vector<JobSpec> jobs;
    for (const auto& start : cfg_.extra_starts) {
      jobs.push_back({start, true, false});
    }
    {
      StartPoint uni;
      uni.sigma = uniform_strategy(mdp_);
      uni.mu = uniform_belief(smdp_);
      jobs.push_back({std::move(uni), true, false});
    }
    if (cfg_.pure_starts) {
      double count = 1.0;
      for (int s = 0; s < mdp_.n_states(); ++s) {
        count *= double(mdp_.feasible(s).size());
        if (count > double(cfg_.max_pure_starts)) break;
      }
      if (count <= double(cfg_.max_pure_starts)) {
        std::vector<int> choice(size_t(mdp_.n_states()), 0);
        int emitted = 0;
        while (true) {
          std::vector<int> actions(size_t(mdp_.n_states()));
          for (int s = 0; s < mdp_.n_states(); ++s) {
            actions[size_t(s)] = mdp_.feasible(s)[size_t(choice[size_t(s)])];
          }
          StartPoint sp;
          sp.sigma = pure_strategy(mdp_, actions);
          sp.mu = uniform_belief(smdp_);
          jobs.push_back({sp, false, false});
          if (emitted < cfg_.max_pure_iterated) {
            jobs.push_back({std::move(sp), true, false});
          }
          ++emitted;
          int s = mdp_.n_states() - 1;
          while (s >= 0) {
            if (++choice[size_t(s)] <
                int(mdp_.feasible(s).size())) {
              break;
            }
            choice[size_t(s)] = 0;
            --s;
          }
          if (s < 0) break;
        }
      }
    }
    for (int r = 0; r < cfg_.restarts; ++r) {
      JobSpec spec;
      spec.iterate = true;
      spec.is_random = true;  // start drawn from the job seed
      jobs.push_back(std::move(spec));
    }
    return jobs;
  }

  StartPoint random_start(uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    StartPoint sp;
    sp.sigma.probs = Vector::Zero(mdp_.n_pairs());
    for (int s = 0; s < mdp_.n_states(); ++s) {
      double sum = 0.0;
      for (int a : mdp_.feasible(s)) {
        const double w = expo(rng) + 1e-12;
        sp.sigma.probs[mdp_.pair_index(s, a)] = w;
        sum += w;
      }
      for (int a : mdp_.feasible(s)) {
        sp.sigma.probs[mdp_.pair_index(s, a)] /= sum;
      }
    }
    std::uniform_int_distribution<int> pick(0, smdp_.n_params() - 1);
    sp.mu = point_mass_belief(smdp_, pick(rng));
    return sp;
  }

  std::vector<EquilibriumCertificate> run_job(const JobSpec& spec,
                                              uint64_t seed) const {
    StartPoint start = spec.is_random ? random_start(seed) : spec.start;
    Strategy sigma = cfg_.epsilon > 0.0
                         ? clip_to_floor(mdp_, start.sigma, cfg_.epsilon)
                         : normalize_strategy(mdp_, start.sigma);
    Vector mu = start.mu.weights.cwiseMax(0.0);
    if (mu.sum() <= 0.0) mu = uniform_belief(smdp_).weights;
    mu /= mu.sum();

    Vector m = start.m.weights;
    if (!spec.iterate) {
      // Direct candidate: test every stationary extreme of the start.
      std::vector<EquilibriumCertificate> out;
      const StationarySet ss = stationary_set(mdp_, sigma);
      for (const auto& extreme : ss.extremes) {
        auto certs = finalize(sigma, extreme.weights, mu);
        for (auto& c : certs) out.push_back(std::move(c));
      }
      return out;
    }

    if (m.size() == 0) {
      const StationarySet ss = stationary_set(mdp_, sigma);
      m = nearest_extreme(ss, Vector()).weights;
    }

    if (!spec.is_random) {
      // Deterministic starts open with a belief already consistent with
      // their own data; otherwise the sheer mass of the parameter grid
      // steers the first steps and interior rest points are never
      // approached.
      OutcomeDistribution m0;
      m0.weights = m.cwiseMax(0.0);
      const double mass = m0.weights.sum();
      if (mass > 0.0) {
        m0.weights /= mass;
        const DivergenceProfile prof0 = table_.profile(m0);
        if (!prof0.minimizers.empty()) {
          mu = restrict_belief(mu, prof0.minimizers, smdp_.n_params()).weights;
        }
      }
    }

    Vector warm = Vector::Zero(mdp_.n_states());
    double tau = cfg_.temp_start;
    double alpha = cfg_.damping;
    int phase = 0;  // 0 annealing, 1 settling, 2 damping cooldown
    int settled = 0;
    for (int iter = 0; iter < cfg_.max_iters; ++iter) {
      const Matrix mix = support_mixture(smdp_, mu);
      SolveOptions vi;
      vi.tol = kMixtureViTol;
      vi.kernel = &mix;
      vi.warm_start = &warm;
      const ValueFunction vf = value_iteration(mdp_, vi);
      warm = vf.values;
      const Vector q = q_values(mdp_, vf.values, &mix);
      Strategy sigma_t = softmax_strategy(mdp_, q, tau, kOptTol);
      if (cfg_.epsilon > 0.0) {
        sigma_t = clip_to_floor(mdp_, std::move(sigma_t), cfg_.epsilon);
      }

      // Only the strategy carries damped state. The frequency and belief
      // are recomputed from it exactly every step; letting them lag behind
      // on their own damped tracks feeds a delayed feedback loop whose
      // oscillation the cooldown then freezes at an arbitrary phase.
      double change = 0.0;
      Vector next = (1.0 - alpha) * sigma.probs + alpha * sigma_t.probs;
      change = std::max(change, linf(next, sigma.probs));
      sigma.probs = std::move(next);

      const StationarySet ss = stationary_set(mdp_, sigma);
      Vector m_t = nearest_extreme(ss, m).weights;
      change = std::max(change, linf(m_t, m));
      m = std::move(m_t);

      OutcomeDistribution m_now;
      m_now.weights = m;
      const DivergenceProfile prof = table_.profile(m_now);
      if (!prof.minimizers.empty()) {
        Vector mu_t =
            restrict_belief(mu, prof.minimizers, smdp_.n_params()).weights;
        change = std::max(change, linf(mu_t, mu));
        mu = std::move(mu_t);
      }

      if (phase == 0) {
        tau *= cfg_.temp_decay;
        if (tau <= cfg_.temp_min) {
          tau = cfg_.temp_min;
          phase = 1;
        }
      } else if (phase == 1) {
        if (change < cfg_.iterate_tol) break;
        if (++settled >= cfg_.settle_iters) phase = 2;
      } else {
        alpha *= cfg_.cooldown_decay;
        if (alpha <= cfg_.damping_floor || change < cfg_.iterate_tol) break;
      }
    }
    return finalize(sigma, m, mu);
  }

  /// Snaps the iterate to an exact triple: floored/cleaned strategy, exact
  /// stationary extreme, and the best supporting belief selected from the
  /// minimizer set (restriction of the incumbent, uniform, then individual
  /// atoms in order of divergence). Returns at most one certificate.
  std::vector<EquilibriumCertificate> finalize(Strategy sigma, Vector m_hint,
                                               Vector mu_hint) const {
    if (cfg_.epsilon > 0.0) {
      sigma = clip_to_floor(mdp_, std::move(sigma), cfg_.epsilon);
    } else {
      sigma = normalize_strategy(mdp_, std::move(sigma));
      // Drop iteration residue so pure limits are exactly pure. The loop
      // stops once the damped step falls below iterate_tol, which leaves
      // up to iterate_tol / damping of stray mass on abandoned pairs; on
      // models with many pairs that stray mass alone can spend the whole
      // optimality budget.
      const double stray = std::max(1e-8, 10.0 * cfg_.iterate_tol / cfg_.damping);
      for (int p = 0; p < mdp_.n_pairs(); ++p) {
        if (sigma.probs[p] < stray) sigma.probs[p] = 0.0;
      }
      sigma = normalize_strategy(mdp_, std::move(sigma));
    }

    const StationarySet ss = stationary_set(mdp_, sigma);
    const OutcomeDistribution& m_final = nearest_extreme(ss, m_hint);
    const DivergenceProfile prof =
        table_.profile(m_final, cfg_.tolerances.wkld_tol);
    if (prof.minimizers.empty()) return {};

    std::vector<Belief> candidates;
    candidates.push_back(
        restrict_belief(mu_hint, prof.minimizers, smdp_.n_params()));
    if (prof.minimizers.size() > 1) {
      Belief uni;
      uni.weights = Vector::Zero(smdp_.n_params());
      for (int k : prof.minimizers) {
        uni.weights[k] = 1.0 / double(prof.minimizers.size());
      }
      candidates.push_back(std::move(uni));
      std::vector<int> order = prof.minimizers;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (prof.values[a] != prof.values[b]) {
          return prof.values[a] < prof.values[b];
        }
        return a < b;
      });
      const std::size_t cap = 128;
      for (std::size_t i = 0; i < order.size() && i < cap; ++i) {
        candidates.push_back(point_mass_belief(smdp_, order[i]));
      }
    }

    const double threshold =
        cfg_.epsilon > 0.0 ? cfg_.epsilon + 1e-9 : kProbTol;
    int best = -1;
    double best_shortfall = kDivergenceInfinity;
    Vector warm = Vector::Zero(mdp_.n_states());
    std::vector<Vector> scored_q(candidates.size());
    auto score = [&](const Belief& mu_c, Vector* q_out) {
      const Matrix mix = support_mixture(smdp_, mu_c.weights);
      SolveOptions vi;
      vi.tol = kMixtureViTol;
      vi.kernel = &mix;
      vi.warm_start = &warm;
      const ValueFunction vf = value_iteration(mdp_, vi);
      warm = vf.values;
      Vector q = q_values(mdp_, vf.values, &mix);
      const double shortfall = shortfall_above_floor(mdp_, sigma, q, threshold);
      if (q_out != nullptr) *q_out = std::move(q);
      return shortfall;
    };
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      double shortfall;
      try {
        shortfall = score(candidates[c], &scored_q[c]);
      } catch (const std::runtime_error&) {
        continue;
      }
      if (shortfall < best_shortfall) {
        best_shortfall = shortfall;
        best = static_cast<int>(c);
      }
      if (shortfall <= cfg_.tolerances.tol_optimality * 0.5) break;
    }
    if (best < 0) return {};

    // Interior strategies mix actions that no single grid atom renders
    // exactly indifferent, but the minimizer set usually brackets the exact
    // fitted parameter. Mixing the incumbent belief with a minimizer whose
    // value gap has the opposite sign and root-finding the weight closes
    // the gap to machine precision.
    const double polish_target = cfg_.tolerances.tol_optimality * 0.5;
    for (int round = 0;
         round < 2 && best_shortfall > polish_target &&
         best_shortfall < kDivergenceInfinity;
         ++round) {
      const Vector& qb = scored_q[static_cast<size_t>(best)];
      if (qb.size() == 0) break;
      int p_low = -1, p_high = -1;
      double worst = 0.0;
      for (int s = 0; s < mdp_.n_states(); ++s) {
        double q_max = -kDivergenceInfinity;
        int arg = -1;
        for (int a : mdp_.feasible(s)) {
          const int p = mdp_.pair_index(s, a);
          if (qb[p] > q_max) {
            q_max = qb[p];
            arg = p;
          }
        }
        for (int a : mdp_.feasible(s)) {
          const int p = mdp_.pair_index(s, a);
          if (sigma.probs[p] <= threshold) continue;
          if (q_max - qb[p] > worst) {
            worst = q_max - qb[p];
            p_low = p;
            p_high = arg;
          }
        }
      }
      if (p_low < 0 || p_high < 0 || p_high == p_low) break;
      int partner = -1;
      double most_negative = 0.0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (scored_q[c].size() == 0) continue;
        const double g = scored_q[c][p_high] - scored_q[c][p_low];
        if (g < most_negative) {
          most_negative = g;
          partner = static_cast<int>(c);
        }
      }
      if (partner < 0) break;
      const Vector& wa = candidates[static_cast<size_t>(best)].weights;
      const Vector& wb = candidates[static_cast<size_t>(partner)].weights;
      double lo = 0.0, hi = 1.0;
      Belief probe;
      bool failed = false;
      for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        probe.weights = (1.0 - mid) * wa + mid * wb;
        Vector q_mid;
        try {
          score(probe, &q_mid);
        } catch (const std::runtime_error&) {
          failed = true;
          break;
        }
        const double g = q_mid[p_high] - q_mid[p_low];
        if (g > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      if (failed) break;
      probe.weights = (1.0 - 0.5 * (lo + hi)) * wa + 0.5 * (lo + hi) * wb;
      Vector q_star;
      double polished;
      try {
        polished = score(probe, &q_star);
      } catch (const std::runtime_error&) {
        break;
      }
      if (polished >= best_shortfall) break;
      candidates.push_back(probe);
      scored_q.push_back(std::move(q_star));
      best = static_cast<int>(candidates.size()) - 1;
      best_shortfall = polished;
    }

    VerifyOptions opts = cfg_.tolerances;
    opts.epsilon = cfg_.epsilon;
    EquilibriumCertificate cert =
        verify(smdp_, sigma, m_final, candidates[size_t(best)], opts);
    std::vector<EquilibriumCertificate> out;
    out.push_back(std::move(cert));
    return out;
  }

  const FiniteSmdp& smdp_;
  const FindConfig& cfg_;
  const FiniteMdp& mdp_;
  DivergenceTable table_;
};

}  // namespace

std::vector<EquilibriumCertificate> find_equilibria(const FiniteSmdp& smdp,
                                                    const FindConfig& config) {
  if (config.damping <= 0.0 || config.damping > 1.0) {
    throw std::invalid_argument("damping must lie in (0, 1]");
  }
  Search search(smdp, config);
  return search.run();
}

std::vector<EquilibriumCertificate> perturbed_equilibria(
    const FiniteSmdp& smdp, double epsilon, const FindConfig& config) {
  if (epsilon <= 0.0) {
    throw std::invalid_argument("floor must be positive");
  }
  const double cap = 1.0 / double(smdp.base.n_actions() + 1);
  if (epsilon > cap) {
    throw std::invalid_argument("floor " + std::to_string(epsilon) +
                                " exceeds the admissible bound " +
                                std::to_string(cap));
  }
  FindConfig cfg = config;
  cfg.epsilon = epsilon;
  return find_equilibria(smdp, cfg);
}

std::vector<EquilibriumCertificate> perfect_equilibria(
    const FiniteSmdp& smdp, const PerfectConfig& config,
    std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings != nullptr) warnings->push_back(msg);
  };
  const FiniteMdp& mdp = smdp.base;
  if (!full_communication(mdp)) {
    warn("full communication fails; the refinement ladder may not converge");
  }
  try {
    const StationarySet ss = stationary_set(mdp, uniform_strategy(mdp));
    for (const auto& extreme : ss.extremes) {
      if (!weak_identification(smdp, extreme)) {
        warn("weak identification fails at a uniform-strategy stationary "
             "distribution");
        break;
      }
    }
  } catch (const std::runtime_error& e) {
    warn(std::string("identification spot check failed: ") + e.what());
  }

  const uint64_t base =
      config.find.seed != 0 ? config.find.seed : instance_hash(smdp);

  const double floor_cap = 1.0 / double(mdp.n_actions() + 1);
  std::vector<double> ladder;
  for (double eps : config.ladder) {
    if (eps > floor_cap) {
      warn("skipping floor " + std::to_string(eps) +
           " above the admissible bound " + std::to_string(floor_cap));
      continue;
    }
    ladder.push_back(eps);
  }

  struct Rung {
    double epsilon = 0.0;
    std::vector<EquilibriumCertificate> certs;
    std::vector<int> parent;  // index into the previous rung, or -1
  };
  std::vector<Rung> rungs;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    Rung rung;
    rung.epsilon = ladder[k];
    FindConfig cfg = config.find;
    cfg.epsilon = rung.epsilon;
    cfg.seed = derive_seed(base, 1 + uint64_t(k));
    if (k > 0) {
      // Continuation rungs lean on the warm starts chained from the rung
      // above; a short anneal and no pure-profile sweep keep them cheap.
      cfg.restarts = config.continuation_restarts;
      cfg.pure_starts = false;
      cfg.temp_start = std::min(cfg.temp_start, 1e-3);
      cfg.settle_iters = std::min(cfg.settle_iters, 40);
      for (const auto& cert : rungs.back().certs) {
        StartPoint sp;
        sp.sigma = cert.sigma;
        sp.mu = cert.mu;
        sp.m = cert.m;
        cfg.extra_starts.push_back(std::move(sp));
      }
    }
    rung.certs = find_equilibria(smdp, cfg);
    rung.parent.assign(rung.certs.size(), -1);
    if (k > 0) {
      const auto& prev = rungs.back().certs;
      for (std::size_t i = 0; i < rung.certs.size(); ++i) {
        double best = kDivergenceInfinity;
        for (std::size_t j = 0; j < prev.size(); ++j) {
          const double d = std::max(
              linf(rung.certs[i].sigma.probs, prev[j].sigma.probs),
              linf(rung.certs[i].m.weights, prev[j].m.weights));
          if (d < best) {
            best = d;
            rung.parent[i] = static_cast<int>(j);
          }
        }
      }
    }
    rungs.push_back(std::move(rung));
  }

  std::vector<EquilibriumCertificate> out;
  if (rungs.size() < 2) return out;
  const Rung& last = rungs.back();
  const Rung& prev = rungs[rungs.size() - 2];
  FindConfig limit_cfg = config.find;
  limit_cfg.epsilon = 0.0;
  Search limit_search(smdp, limit_cfg);
  for (std::size_t i = 0; i < last.certs.size(); ++i) {
    const int j = last.parent[i];
    if (j < 0) continue;
    const auto& c1 = last.certs[i];
    const auto& c0 = prev.certs[size_t(j)];
    const double gap = std::max(linf(c1.sigma.probs, c0.sigma.probs),
                                linf(c1.m.weights, c0.m.weights));
    if (gap >= config.chain_tol) continue;

    // Linear extrapolation in the floor; corner coordinates sitting exactly
    // at their floors land exactly on 0.
    const double e1 = last.epsilon;
    const double e0 = prev.epsilon;
    Vector probs =
        c1.sigma.probs + (c1.sigma.probs - c0.sigma.probs) * (e1 / (e0 - e1));
    probs = probs.cwiseMax(0.0);
    for (Eigen::Index p = 0; p < probs.size(); ++p) {
      if (probs[p] < 1e-10) probs[p] = 0.0;
    }
    Strategy sigma0{std::move(probs)};
    try {
      sigma0 = normalize_strategy(smdp.base, std::move(sigma0));
    } catch (const std::invalid_argument&) {
      continue;
    }
    auto certs =
        limit_search.finalize_triple(sigma0, c1.m.weights, c1.mu.weights);
    for (auto& cert : certs) {
      if (!cert.accepted()) continue;
      bool dup = false;
      for (const auto& kept : out) {
        if (linf(kept.sigma.probs, cert.sigma.probs) <
                config.find.dedup_tol &&
            linf(kept.m.weights, cert.m.weights) < config.find.dedup_tol) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(std::move(cert));
    }
  }
  return out;
}

DeltaBarResult delta_bar(const FiniteSmdp& smdp, int belief_samples,
                         uint64_t seed) {
  const FiniteMdp& mdp = smdp.base;
  const int n_theta = smdp.n_params();
  DeltaBarResult result;
  result.payoff_bound = mdp.payoff_bound();

  // Expected one-period payoff of each pair under each grid parameter; the
  // myopic payoff under a belief is the belief-weighted combination.
  Matrix reward(n_theta, mdp.n_pairs());
  {
    Vector row(mdp.n_states());
    for (int k = 0; k < n_theta; ++k) {
      for (int p = 0; p < mdp.n_pairs(); ++p) {
        smdp.family->row(k, p, row);
        reward(k, p) = row.dot(mdp.payoff().row(p));
      }
    }
  }

  double margin = kDivergenceInfinity;
  bool exact = true;
  std::mt19937_64 rng(derive_seed(seed != 0 ? seed : instance_hash(smdp), 7));
  std::exponential_distribution<double> expo(1.0);

  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto& acts = mdp.feasible(s);
    if (acts.size() <= 1) continue;

    // At each vertex belief, find the best action and its margin over the
    // runner-up. If the strict argmax is the same action at every vertex,
    // the margin is a minimum of positive linear functions of the belief,
    // hence concave, and its infimum over the simplex is the vertex
    // minimum. A tie or a change of argmax forces the infimum to zero
    // somewhere on a connecting segment.
    int common_best = -1;
    bool degenerate = false;
    double state_margin = kDivergenceInfinity;
    for (int k = 0; k < n_theta && !degenerate; ++k) {
      double best = -kDivergenceInfinity;
      double second = -kDivergenceInfinity;
      int best_action = -1;
      for (int a : acts) {
        const double v = reward(k, mdp.pair_index(s, a));
        if (v > best) {
          second = best;
          best = v;
          best_action = a;
        } else if (v > second) {
          second = v;
        }
      }
      if (best - second <= 0.0) {
        degenerate = true;
        break;
      }
      if (common_best == -1) common_best = best_action;
      if (best_action != common_best) {
        degenerate = true;
        break;
      }
      state_margin = std::min(state_margin, best - second);
    }
    if (degenerate) {
      margin = 0.0;
      break;
    }
    margin = std::min(margin, state_margin);

    // Random interior beliefs cannot go below the vertex bound, but they
    // are cheap and double as a sanity check on the argument above.
    Vector mu(n_theta);
    for (int draw = 0; draw < belief_samples; ++draw) {
      for (int k = 0; k < n_theta; ++k) mu[k] = expo(rng) + 1e-12;
      mu /= mu.sum();
      double best = -kDivergenceInfinity;
      double second = -kDivergenceInfinity;
      for (int a : acts) {
        double v = 0.0;
        const int p = mdp.pair_index(s, a);
        for (int k = 0; k < n_theta; ++k) v += mu[k] * reward(k, p);
        if (v > best) {
          second = best;
          best = v;
        } else if (v > second) {
          second = v;
        }
      }
      margin = std::min(margin, best - second);
    }
  }

  result.exact = exact;
  if (!std::isfinite(margin)) {
    // Only singleton action sets anywhere: any discount works.
    result.delta_hat = kDivergenceInfinity;
    result.delta_bar = 1.0;
    result.note = "exact (no competing actions)";
    return result;
  }
  result.delta_hat = std::max(margin, 0.0);
  if (result.delta_hat == 0.0 || result.payoff_bound <= 0.0) {
    result.delta_bar = 0.0;
  } else {
    const double ratio = result.delta_hat / result.payoff_bound;
    result.delta_bar = ratio / (2.0 + ratio);
  }
  result.note = "conservative estimate (vertex margins plus sampled beliefs)";
  return result;
}

}  // namespace berknash
