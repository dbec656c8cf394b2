#pragma once

#include "berknash/model.hpp"

namespace berknash {

/// Weighted Kullback-Leibler divergence of one candidate kernel from the
/// true transition law, weighting each feasible pair's conditional
/// divergence by its mass under m. Terms with mass zero drop out; a
/// supported pair where the candidate puts zero probability on an outcome
/// the true law can produce makes the result infinite.
double weighted_divergence(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                           int theta);

struct DivergenceProfile {
  Vector values;                // one entry per grid parameter
  double min_value = 0.0;       // may be infinity when nothing fits
  std::vector<int> minimizers;  // ascending indices within tol of the min
  double tol = kWkldTol;
};

/// Divergence of every grid parameter against m, with the near-minimal set.
DivergenceProfile divergence_profile(const FiniteSmdp& smdp,
                                     const OutcomeDistribution& m,
                                     double tol = kWkldTol, int threads = 1);

/// Precomputes every pair's conditional divergence so that profiling many
/// outcome distributions against the same model reduces to weighted sums
/// over their supports. Worth building whenever more than a handful of
/// profiles are needed; iterative solvers profile thousands of times.
class DivergenceTable {
 public:
  explicit DivergenceTable(const FiniteSmdp& smdp, int threads = 1);

  DivergenceProfile profile(const OutcomeDistribution& m,
                            double tol = kWkldTol) const;

 private:
  Matrix table_;  // n_pairs x n_params; infinite entries mark uncovered rows
};

/// Indices of near-minimal parameters. Throws when every parameter has
/// infinite divergence, since no belief update is defined in that case.
std::vector<int> minimizer_set(const FiniteSmdp& smdp,
                               const OutcomeDistribution& m,
                               double tol = kWkldTol, int threads = 1);

/// All near-minimal parameters induce the same transition law on the pairs
/// m actually visits.
bool weak_identification(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                         double tol = 1e-9, double wkld_tol = kWkldTol);

/// All near-minimal parameters induce the same transition law on every
/// feasible pair, visited or not.
bool strong_identification(const FiniteSmdp& smdp, const OutcomeDistribution& m,
                           double tol = 1e-9, double wkld_tol = kWkldTol);

}  // namespace berknash
