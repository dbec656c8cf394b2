#include "berknash/learning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "berknash/chain.hpp"
#include "berknash/divergence.hpp"
#include "berknash/mdp.hpp"
#include "berknash/runtime.hpp"

namespace berknash {

namespace {

constexpr int64_t kMaxGridPoints = 1000000;
constexpr double kLikelihoodFloor = 1e-300;

}  // namespace

BeliefGrid BeliefGrid::regular(int n_params, int resolution) {
  if (n_params < 1) {
    throw std::invalid_argument("belief grid needs at least one parameter");
  }
  if (resolution < 1) {
    throw std::invalid_argument("belief grid resolution must be at least 1");
  }
  double count = 1.0;  // C(resolution + n_params - 1, n_params - 1)
  for (int i = 1; i < n_params; ++i) {
    count *= double(resolution + i) / double(i);
    if (count > double(kMaxGridPoints) * 1.000001) {
      throw std::invalid_argument(
          "belief grid would exceed the guard of 1000000 points");
    }
  }

  BeliefGrid grid;
  grid.n_params_ = n_params;
  grid.resolution_ = resolution;
  std::vector<int> comp(size_t(n_params), 0);
  comp[0] = resolution;
  while (true) {
    Belief b;
    b.weights = Vector::Zero(n_params);
    for (int i = 0; i < n_params; ++i) {
      b.weights[i] = double(comp[size_t(i)]) / double(resolution);
    }
    grid.index_[comp] = int(grid.points_.size());
    grid.points_.push_back(std::move(b));
    // Next composition in colex-like order: move one unit from the first
    // positive slot to its right neighbor and pull everything before it
    // back to the front.
    int i = 0;
    while (i < n_params && comp[size_t(i)] == 0) ++i;
    if (i == n_params - 1) break;
    const int carry = comp[size_t(i)] - 1;
    comp[size_t(i)] = 0;
    comp[0] = carry;
    ++comp[size_t(i) + 1];
  }
  return grid;
}

BeliefGrid BeliefGrid::from_points(std::vector<Belief> points) {
  if (points.empty()) {
    throw std::invalid_argument("explicit belief grid has no points");
  }
  const Eigen::Index d = points.front().weights.size();
  if (d != 2) {
    throw std::invalid_argument(
        "explicit belief grids support two-atom families only");
  }
  for (const auto& b : points) {
    if (b.weights.size() != d) {
      throw std::invalid_argument("belief grid points have mixed lengths");
    }
    if (std::abs(b.weights.sum() - 1.0) > 1e-9 ||
        b.weights.minCoeff() < -1e-12) {
      throw std::invalid_argument("belief grid point is not a distribution");
    }
  }
  std::sort(points.begin(), points.end(),
            [](const Belief& a, const Belief& b) {
              return a.weights[0] < b.weights[0];
            });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].weights[0] - points[i - 1].weights[0] < 1e-12) {
      throw std::invalid_argument("explicit belief grid has duplicate points");
    }
  }
  BeliefGrid grid;
  grid.n_params_ = 2;
  grid.resolution_ = 0;
  grid.points_ = std::move(points);
  return grid;
}

std::vector<std::pair<int, double>> BeliefGrid::locate(
    const Belief& mu) const {
  if (mu.weights.size() != n_params_) {
    throw std::invalid_argument("belief length does not match the grid");
  }
  Vector w = mu.weights.cwiseMax(0.0);
  const double mass = w.sum();
  if (mass <= 0.0) {
    throw std::invalid_argument("belief has no mass");
  }
  w /= mass;

  if (resolution_ == 0) {
    // Explicit segment grid: linear interpolation between the neighbors of
    // the first coordinate, clamped at the ends.
    const double x = w[0];
    if (x <= points_.front().weights[0]) return {{0, 1.0}};
    if (x >= points_.back().weights[0]) {
      return {{int(points_.size()) - 1, 1.0}};
    }
    int hi = 1;
    while (points_[size_t(hi)].weights[0] < x) ++hi;
    const int lo = hi - 1;
    const double a = points_[size_t(lo)].weights[0];
    const double b = points_[size_t(hi)].weights[0];
    const double lam = (x - a) / (b - a);
    if (lam < 1e-14) return {{lo, 1.0}};
    if (lam > 1.0 - 1e-14) return {{hi, 1.0}};
    return {{lo, 1.0 - lam}, {hi, lam}};
  }

  const int d = n_params_;
  const int r = resolution_;
  if (d == 1) return {{0, 1.0}};

  // Work in cumulative coordinates c_j = r * (w_0 + ... + w_j); the lattice
  // triangulation by fractional-part order keeps every vertex inside the
  // monotone region, so all interpolation nodes are valid grid points.
  std::vector<double> c(size_t(d - 1));
  double run = 0.0;
  for (int j = 0; j < d - 1; ++j) {
    run += w[j] * double(r);
    c[size_t(j)] = std::min(std::max(run, 0.0), double(r));
    if (j > 0) c[size_t(j)] = std::max(c[size_t(j)], c[size_t(j - 1)]);
  }

  std::vector<int> base(size_t(d - 1));
  std::vector<double> frac(size_t(d - 1));
  for (int j = 0; j < d - 1; ++j) {
    base[size_t(j)] = std::min(int(std::floor(c[size_t(j)])), r - 1);
    frac[size_t(j)] = c[size_t(j)] - double(base[size_t(j)]);
  }
  std::vector<int> order(size_t(d - 1));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return frac[size_t(a)] > frac[size_t(b)];
  });

  std::vector<double> lambda(static_cast<std::size_t>(d));
  lambda[0] = 1.0 - frac[size_t(order[0])];
  for (int k = 1; k < d - 1; ++k) {
    lambda[size_t(k)] =
        frac[size_t(order[size_t(k - 1)])] - frac[size_t(order[size_t(k)])];
  }
  lambda[size_t(d - 1)] = frac[size_t(order[size_t(d - 2)])];

  std::map<std::vector<int>, double> combined;
  std::vector<int> vertex = base;
  for (int k = 0; k < d; ++k) {
    if (k > 0) ++vertex[size_t(order[size_t(k - 1)])];
    if (lambda[size_t(k)] > 1e-14) {
      // Back to occupancy counts: differences of the cumulative vertex.
      std::vector<int> comp(static_cast<std::size_t>(d));
      int prev = 0;
      for (int j = 0; j < d - 1; ++j) {
        comp[size_t(j)] = std::max(0, vertex[size_t(j)] - prev);
        prev = vertex[size_t(j)];
      }
      comp[size_t(d - 1)] = std::max(0, r - prev);
      combined[comp] += lambda[size_t(k)];
    }
  }

  std::vector<std::pair<int, double>> out;
  double total = 0.0;
  for (const auto& [comp, weight] : combined) {
    const auto it = index_.find(comp);
    if (it == index_.end()) continue;  // clamped fp edge; renormalized below
    out.emplace_back(it->second, weight);
    total += weight;
  }
  if (out.empty() || total <= 0.0) {
    throw std::runtime_error("belief interpolation found no grid vertex");
  }
  for (auto& [idx, weight] : out) weight /= total;
  return out;
}

Belief bayes_update(const FiniteSmdp& smdp, const Belief& mu, int s, int x,
                    int s_next) {
  const FiniteMdp& mdp = smdp.base;
  if (mu.weights.size() != smdp.n_params()) {
    throw std::invalid_argument("belief length does not match the grid");
  }
  if (s < 0 || s >= mdp.n_states() || s_next < 0 ||
      s_next >= mdp.n_states()) {
    throw std::invalid_argument("state index out of range");
  }
  const int p = mdp.pair_index(s, x);
  if (p < 0) {
    throw std::invalid_argument("action is not feasible at the state");
  }
  Belief post;
  post.weights = Vector::Zero(smdp.n_params());
  Vector row(mdp.n_states());
  double denom = 0.0;
  for (int k = 0; k < smdp.n_params(); ++k) {
    const double prior = mu.weights[k];
    if (prior <= 0.0) continue;
    smdp.family->row(k, p, row);
    post.weights[k] = prior * row[s_next];
    denom += post.weights[k];
  }
  if (denom <= kLikelihoodFloor) {
    throw std::runtime_error("zero-likelihood observation");
  }
  post.weights /= denom;
  return post;
}

namespace {

/// One successor branch from a (grid point, pair) node: the transition
/// probability under the grid belief, the one-period payoff, and the
/// posterior folded back onto the grid.
struct Arc {
  int s_next = 0;
  double prob = 0.0;
  double payoff = 0.0;
  std::vector<std::pair<int, double>> next_belief;
};

}  // namespace

BeliefValue solve_belief_mdp(const FiniteSmdp& smdp, const BeliefGrid& grid,
                             double tol, int threads) {
  const FiniteMdp& mdp = smdp.base;
  if (grid.n_params() != smdp.n_params()) {
    throw std::invalid_argument("belief grid does not match the family");
  }
  const int n_points = grid.n_points();
  const int n_pairs = mdp.n_pairs();
  if (int64_t(n_points) > kMaxGridPoints) {
    throw std::invalid_argument(
        "belief grid would exceed the guard of 1000000 points");
  }

  // Expand every (grid point, pair) into its successor branches once; the
  // sweeps then only do arithmetic.
  std::vector<std::vector<Arc>> arcs(size_t(n_points) * size_t(n_pairs));
  run_indexed_jobs(
      n_points,
      [&](int g) {
        Vector mix(mdp.n_states());
        const Belief& mu = grid.points()[size_t(g)];
        for (int p = 0; p < n_pairs; ++p) {
          smdp.family->mixture_row(mu.weights, p, mix);
          auto& list = arcs[size_t(g) * size_t(n_pairs) + size_t(p)];
          for (int sn = 0; sn < mdp.n_states(); ++sn) {
            if (mix[sn] <= kLikelihoodFloor) continue;
            Arc arc;
            arc.s_next = sn;
            arc.prob = mix[sn];
            arc.payoff = mdp.payoff()(p, sn);
            arc.next_belief = grid.locate(bayes_update(
                smdp, mu, mdp.pair(p).state, mdp.pair(p).action, sn));
            list.push_back(std::move(arc));
          }
        }
      },
      threads);

  const double delta = mdp.discount();
  BeliefValue result;
  result.grid = grid;
  result.values = Matrix::Zero(mdp.n_states(), n_points);

  const double stop = delta > 0.0
                          ? tol * (1.0 - delta) / (2.0 * delta)
                          : kDivergenceInfinity;
  const int max_sweeps = 2000000;
  Matrix next(mdp.n_states(), n_points);
  Vector point_change = Vector::Zero(n_points);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    run_indexed_jobs(
        n_points,
        [&](int g) {
          double local = 0.0;
          for (int s = 0; s < mdp.n_states(); ++s) {
            double best = -kDivergenceInfinity;
            for (int a : mdp.feasible(s)) {
              const int p = mdp.pair_index(s, a);
              double total = 0.0;
              for (const Arc& arc :
                   arcs[size_t(g) * size_t(n_pairs) + size_t(p)]) {
                double cont = 0.0;
                for (const auto& [idx, weight] : arc.next_belief) {
                  cont += weight * result.values(arc.s_next, idx);
                }
                total += arc.prob * (arc.payoff + delta * cont);
              }
              best = std::max(best, total);
            }
            next(s, g) = best;
            local = std::max(local, std::abs(best - result.values(s, g)));
          }
          point_change[g] = local;
        },
        threads);
    const double change = point_change.maxCoeff();
    result.values.swap(next);
    result.sweeps = sweep;
    result.residual = change;
    if (delta == 0.0 || change <= stop) return result;
  }
  throw std::runtime_error(
      "belief-space value iteration failed to converge within the sweep "
      "limit");
}

double value_of_experimentation(const FiniteSmdp& smdp, const BeliefValue& W,
                                int s, int x, const Belief& mu) {
  const FiniteMdp& mdp = smdp.base;
  const int p = mdp.pair_index(s, x);
  if (p < 0) {
    throw std::invalid_argument("action is not feasible at the state");
  }
  if (mu.weights.size() != smdp.n_params()) {
    throw std::invalid_argument("belief length does not match the grid");
  }

  Vector mix(mdp.n_states());
  smdp.family->mixture_row(mu.weights, p, mix);

  double with_updates = 0.0;
  for (int sn = 0; sn < mdp.n_states(); ++sn) {
    if (mix[sn] <= kLikelihoodFloor) continue;
    const Belief post = bayes_update(smdp, mu, s, x, sn);
    double w = 0.0;
    for (const auto& [idx, weight] : W.grid.locate(post)) {
      w += weight * W.values(sn, idx);
    }
    with_updates += mix[sn] * w;
  }

  const Matrix frozen = mixture_kernel(smdp, mu);
  SolveOptions vi;
  vi.tol = 1e-12;
  vi.kernel = &frozen;
  const ValueFunction vf = value_iteration(mdp, vi);
  double without_updates = 0.0;
  for (int sn = 0; sn < mdp.n_states(); ++sn) {
    if (mix[sn] <= kLikelihoodFloor) continue;
    without_updates += mix[sn] * vf.values[sn];
  }
  return with_updates - without_updates;
}

const TraceRecord* LearningTrace::record_at(int64_t t) const {
  if (dense) {
    if (t < 0 || t >= int64_t(records.size())) return nullptr;
    return &records[size_t(t)];
  }
  const auto it = std::lower_bound(
      records.begin(), records.end(), t,
      [](const TraceRecord& rec, int64_t when) { return rec.t < when; });
  if (it == records.end() || it->t != t) return nullptr;
  return &*it;
}

StabilityResult detect_stability(const FiniteSmdp& smdp,
                                 const LearningTrace& trace, int window,
                                 double tol) {
  if (window < 2) {
    throw std::invalid_argument("stability window must be at least 2");
  }
  StabilityResult result;
  if (int64_t(trace.records.size()) < window) return result;
  const std::size_t begin = trace.records.size() - size_t(window);

  const FiniteMdp& mdp = smdp.base;
  Vector sigma_lo = trace.records[begin].sigma.probs;
  Vector sigma_hi = sigma_lo;
  Vector m_lo = trace.records[begin].m.weights;
  Vector m_hi = m_lo;
  Vector sigma_sum = Vector::Zero(mdp.n_pairs());
  Vector mu_sum = Vector::Zero(smdp.n_params());
  for (std::size_t i = begin; i < trace.records.size(); ++i) {
    const TraceRecord& rec = trace.records[i];
    sigma_lo = sigma_lo.cwiseMin(rec.sigma.probs);
    sigma_hi = sigma_hi.cwiseMax(rec.sigma.probs);
    m_lo = m_lo.cwiseMin(rec.m.weights);
    m_hi = m_hi.cwiseMax(rec.m.weights);
    sigma_sum += rec.sigma.probs;
    mu_sum += rec.mu.weights;
  }
  result.sigma_oscillation = (sigma_hi - sigma_lo).maxCoeff();
  result.m_oscillation = (m_hi - m_lo).maxCoeff();

  result.sigma.probs = sigma_sum / double(window);
  result.sigma = normalize_strategy(mdp, std::move(result.sigma));
  result.m_empirical = trace.records.back().m;
  result.mu.weights = mu_sum / mu_sum.sum();

  if (result.sigma_oscillation <= tol && result.m_oscillation <= tol) {
    result.verdict = StabilityVerdict::kStable;
    const StationarySet ss = stationary_set(mdp, result.sigma);
    std::size_t best = 0;
    double best_dist = kDivergenceInfinity;
    for (std::size_t i = 0; i < ss.extremes.size(); ++i) {
      const double d = (ss.extremes[i].weights -
                        result.m_empirical.weights)
                           .cwiseAbs()
                           .maxCoeff();
      if (d < best_dist) {
        best_dist = d;
        best = i;
      }
    }
    result.m = ss.extremes[best];
    result.exhaustive = exhaustive_learning_check(smdp, result.mu);
  } else {
    result.m = result.m_empirical;
  }
  return result;
}

std::vector<ConcentrationPoint> concentration_diagnostic(
    const LearningTrace& trace, const FiniteSmdp& smdp, double eta) {
  const int n = smdp.n_params();
  const Matrix params = smdp.family->parameter_matrix();

  if (eta <= 0.0) {
    // Twice the median nearest-neighbor spacing, estimated from a sample of
    // anchors when the grid is large.
    const int anchors = std::min(n, 1024);
    const int stride = std::max(1, n / anchors);
    std::vector<double> nearest;
    for (int i = 0; i < n; i += stride) {
      double best = kDivergenceInfinity;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        best = std::min(best, (params.row(i) - params.row(j)).norm());
      }
      if (best < kDivergenceInfinity) nearest.push_back(best);
    }
    if (nearest.empty()) {
      eta = 1e-9;
    } else {
      std::nth_element(nearest.begin(),
                       nearest.begin() + long(nearest.size()) / 2,
                       nearest.end());
      eta = 2.0 * nearest[nearest.size() / 2];
    }
  }

  std::vector<int64_t> times;
  for (int64_t t = 100; t < trace.periods; t *= 10) times.push_back(t);
  if (trace.periods > 0 && (times.empty() || times.back() != trace.periods - 1))
    times.push_back(trace.periods - 1);

  std::vector<ConcentrationPoint> out;
  for (int64_t t : times) {
    const TraceRecord* rec = trace.record_at(t);
    if (rec == nullptr) continue;
    OutcomeDistribution m = rec->m;
    const double mass = m.weights.sum();
    if (mass <= 0.0) continue;
    m.weights /= mass;
    // Posterior odds across a divergence gap dK scale as exp(-t * dK), so
    // after t observations the data cannot rank parameters closer than
    // about 1/t in divergence. Widening the tie band accordingly keeps the
    // reported set at the resolution the posterior itself can sustain;
    // rarely visited pairs would otherwise pin a strict argmin that the
    // belief has no data to single out.
    const double tie = std::max(kWkldTol, 12.0 / double(t));
    const DivergenceProfile prof = divergence_profile(smdp, m, tie);
    if (prof.minimizers.empty()) continue;

    ConcentrationPoint point;
    point.t = t;
    point.min_divergence = prof.min_value;
    point.n_minimizers = int(prof.minimizers.size());
    double near = 0.0;
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      const double w = rec->mu.weights[k];
      if (w <= 0.0) continue;
      total += w;
      for (int j : prof.minimizers) {
        if ((params.row(k) - params.row(j)).norm() <= eta) {
          near += w;
          break;
        }
      }
    }
    point.mass_near_minimizers = total > 0.0 ? near / total : 0.0;
    out.push_back(point);
  }
  return out;
}

}  // namespace berknash
