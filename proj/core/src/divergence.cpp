#include "berknash/divergence.hpp"

#include <cmath>
#include <stdexcept>

#include "berknash/runtime.hpp"

namespace berknash {

double weighted_divergence(const FiniteSmdp& smdp,
                           const OutcomeDistribution& m, int theta) {
  const FiniteMdp& mdp = smdp.base;
  if (m.weights.size() != mdp.n_pairs()) {
    throw std::invalid_argument("outcome distribution has wrong length");
  }
  if (theta < 0 || theta >= smdp.family->size()) {
    throw std::invalid_argument("parameter index out of range");
  }
  double total = 0.0;
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    const double w = m.weights[p];
    if (w <= 0.0) continue;
    const double d = smdp.family->pair_divergence(mdp.kernel(), p, theta);
    if (!std::isfinite(d)) return kDivergenceInfinity;
    total += w * d;
  }
  return total;
}

DivergenceProfile divergence_profile(const FiniteSmdp& smdp,
                                     const OutcomeDistribution& m, double tol,
                                     int threads) {
  const int n = smdp.family->size();
  DivergenceProfile profile;
  profile.tol = tol;
  profile.values.resize(n);
  if (m.weights.size() != smdp.base.n_pairs()) {
    throw std::invalid_argument("outcome distribution has wrong length");
  }
  if (!smdp.family->batched_divergence(smdp.base.kernel(), m.weights,
                                       profile.values)) {
    run_indexed_jobs(
        n,
        [&](int k) { profile.values[k] = weighted_divergence(smdp, m, k); },
        threads);
  }
  profile.min_value = profile.values.minCoeff();
  if (std::isfinite(profile.min_value)) {
    for (int k = 0; k < n; ++k) {
      if (profile.values[k] <= profile.min_value + tol) {
        profile.minimizers.push_back(k);
      }
    }
  }
  return profile;
}

DivergenceTable::DivergenceTable(const FiniteSmdp& smdp, int threads) {
  const FiniteMdp& mdp = smdp.base;
  const int n = smdp.family->size();
  table_.resize(mdp.n_pairs(), n);
  run_indexed_jobs(
      n,
      [&](int k) {
        for (int p = 0; p < mdp.n_pairs(); ++p) {
          table_(p, k) = smdp.family->pair_divergence(mdp.kernel(), p, k);
        }
      },
      threads);
}

DivergenceProfile DivergenceTable::profile(const OutcomeDistribution& m,
                                           double tol) const {
  if (m.weights.size() != table_.rows()) {
    throw std::invalid_argument("outcome distribution has wrong length");
  }
  const int n = int(table_.cols());
  DivergenceProfile profile;
  profile.tol = tol;
  profile.values = Vector::Zero(n);
  for (int p = 0; p < table_.rows(); ++p) {
    const double w = m.weights[p];
    if (w <= 0.0) continue;
    for (int k = 0; k < n; ++k) {
      // Adding into an already infinite entry keeps it infinite, so the
      // zero-mass convention is the only case needing the branch above.
      profile.values[k] += w * table_(p, k);
    }
  }
  profile.min_value = profile.values.minCoeff();
  if (std::isfinite(profile.min_value)) {
    for (int k = 0; k < n; ++k) {
      if (profile.values[k] <= profile.min_value + tol) {
        profile.minimizers.push_back(k);
      }
    }
  }
  return profile;
}

std::vector<int> minimizer_set(const FiniteSmdp& smdp,
                               const OutcomeDistribution& m, double tol,
                               int threads) {
  DivergenceProfile profile = divergence_profile(smdp, m, tol, threads);
  if (!std::isfinite(profile.min_value)) {
    throw std::runtime_error(
        "every parameter has infinite weighted divergence against the given "
        "outcome distribution; the model family cannot rationalize it");
  }
  return profile.minimizers;
}

namespace {

/// Checks whether all minimizers produce identical rows (sup norm within
/// tol) on the selected pairs.
bool minimizers_agree(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                      bool visited_only, double tol, double wkld_tol) {
  const std::vector<int> mins = minimizer_set(smdp, m, wkld_tol);
  if (mins.size() <= 1) return true;
  const FiniteMdp& mdp = smdp.base;
  Vector reference(mdp.n_states());
  Vector candidate(mdp.n_states());
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    if (visited_only && m.weights[p] <= 0.0) continue;
    smdp.family->row(mins.front(), p, reference);
    for (std::size_t i = 1; i < mins.size(); ++i) {
      smdp.family->row(mins[i], p, candidate);
      if ((candidate - reference).cwiseAbs().maxCoeff() > tol) return false;
    }
  }
  return true;
}

}  // namespace

bool weak_identification(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                         double tol, double wkld_tol) {
  return minimizers_agree(smdp, m, /*visited_only=*/true, tol, wkld_tol);
}

bool strong_identification(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                           double tol, double wkld_tol) {
  return minimizers_agree(smdp, m, /*visited_only=*/false, tol, wkld_tol);
}

}  // namespace berknash
