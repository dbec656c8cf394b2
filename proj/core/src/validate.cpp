#include <cmath>
#include <sstream>

#include "berknash/model.hpp"

namespace berknash {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void check_probability_row(const FiniteMdp& mdp, const Vector& row,
                           const std::string& where,
                           std::vector<ValidationIssue>& issues) {
  double sum = 0.0;
  for (Eigen::Index s = 0; s < row.size(); ++s) {
    if (row[s] < 0.0) {
      issues.push_back({where, "negative probability " + fmt(row[s]) +
                                   " at successor '" +
                                   mdp.state_names()[size_t(s)] + "'"});
    }
    sum += row[s];
  }
  if (std::abs(sum - 1.0) > kProbTol)
    issues.push_back({where, "row sums to " + fmt(sum) +
                                 ", off 1 by more than " + fmt(kProbTol)});
}

std::string pair_label(const FiniteMdp& mdp, int p) {
  const auto& pr = mdp.pair(p);
  return "state '" + mdp.state_names()[size_t(pr.state)] + "' action '" +
         mdp.action_names()[size_t(pr.action)] + "'";
}

}  // namespace

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  if (ok()) {
    os << "ok";
  } else {
    for (const auto& i : issues) os << i.where << ": " << i.message << "\n";
  }
  if (rows_sampled) os << "(family rows checked on a subsample)\n";
  return os.str();
}

ValidationReport validate(const FiniteMdp& mdp) {
  ValidationReport report;
  Vector q0 = mdp.initial();
  check_probability_row(mdp, q0, "initial distribution", report.issues);
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    check_probability_row(mdp, mdp.kernel().row(p),
                          "kernel row for " + pair_label(mdp, p),
                          report.issues);
    for (int s = 0; s < mdp.n_states(); ++s) {
      if (!std::isfinite(mdp.payoff()(p, s)))
        report.issues.push_back({"payoff row for " + pair_label(mdp, p),
                                 "non-finite payoff at successor '" +
                                     mdp.state_names()[size_t(s)] + "'"});
    }
  }
  return report;
}

ValidationReport validate(const FiniteSmdp& smdp) {
  ValidationReport report = validate(smdp.base);
  if (!smdp.family) {
    report.issues.push_back({"family", "missing kernel family"});
    report.regularity_ok = false;
    return report;
  }
  const auto& mdp = smdp.base;
  const int nk = smdp.family->size();
  const int np = mdp.n_pairs();

  // Row-level checks, subsampled for very large families.
  const long total_rows = static_cast<long>(nk) * np;
  const long row_budget = 200000;
  const long stride = total_rows <= row_budget ? 1 : total_rows / row_budget;
  report.rows_sampled = stride > 1;
  Vector buf(mdp.n_states());
  for (long flat = 0; flat < total_rows; flat += stride) {
    const int k = static_cast<int>(flat / np);
    const int p = static_cast<int>(flat % np);
    smdp.family->row(k, p, buf);
    check_probability_row(
        mdp, buf,
        "family kernel " + std::to_string(k) + ", row for " +
            pair_label(mdp, p),
        report.issues);
  }

  // Finite-grid surrogate for the density requirement: some grid point must
  // dominate the support of the true kernel everywhere.
  bool found = false;
  for (int k = 0; k < nk && !found; ++k) {
    bool dominates = true;
    for (int p = 0; p < np && dominates; ++p) {
      smdp.family->row(k, p, buf);
      for (int s = 0; s < mdp.n_states(); ++s) {
        if (mdp.kernel()(p, s) > 0.0 && !(buf[s] > 0.0)) {
          dominates = false;
          break;
        }
      }
    }
    found = dominates;
  }
  report.regularity_ok = found;
  if (!found)
    report.issues.push_back(
        {"family", "regularity surrogate failed: no grid parameter has "
                   "positive probability wherever the true kernel does"});
  return report;
}

}  // namespace berknash
