#include "berknash/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace berknash::io {

namespace {

void put_pair_vector(std::ostringstream& out, const FiniteMdp& mdp,
                     const Vector& v, const char* label) {
  out << label << ":\n";
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    out << "  " << mdp.state_names()[static_cast<size_t>(mdp.pair(p).state)]
        << " " << mdp.action_names()[static_cast<size_t>(mdp.pair(p).action)]
        << " " << format_double(v[p]) << "\n";
  }
}

}  // namespace

std::string certificate_record(const FiniteSmdp& smdp,
                               const EquilibriumCertificate& cert,
                               const std::string& kind) {
  std::ostringstream out;
  out << "[certificate]\n";
  out << "kind: " << kind << "\n";
  out << "accepted: " << (cert.accepted() ? "yes" : "no") << "\n";
  out << "epsilon: " << format_double(cert.epsilon) << "\n";
  out << "exhaustive_learning: " << (cert.exhaustive_learning ? "yes" : "no")
      << "\n";
  out << "residual_optimality: " << format_double(cert.residual_optimality)
      << "\n";
  out << "residual_belief: " << format_double(cert.residual_belief) << "\n";
  out << "residual_stationarity: "
      << format_double(cert.residual_stationarity) << "\n";
  out << "tol_optimality: " << format_double(cert.tolerances.tol_optimality)
      << "\n";
  out << "tol_belief: " << format_double(cert.tolerances.tol_belief) << "\n";
  out << "tol_stationarity: "
      << format_double(cert.tolerances.tol_stationarity) << "\n";
  put_pair_vector(out, smdp.base, cert.sigma.probs, "sigma");
  put_pair_vector(out, smdp.base, cert.m.weights, "m");
  out << "mu:\n";
  for (int k = 0; k < cert.mu.weights.size(); ++k) {
    if (cert.mu.weights[k] == 0.0) continue;
    out << "  " << k << " " << format_double(cert.mu.weights[k]);
    if (smdp.family) {
      const Vector param = smdp.family->parameter(k);
      for (int d = 0; d < param.size(); ++d) {
        out << " " << format_double(param[d]);
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string certificates_file(const FiniteSmdp& smdp,
                              const std::vector<EquilibriumCertificate>& certs,
                              const std::string& kind,
                              const std::vector<std::string>& warnings) {
  std::ostringstream out;
  out << "[certificates]\n";
  out << "kind: " << kind << "\n";
  out << "count: " << certs.size() << "\n";
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  for (const auto& cert : certs) {
    out << "\n" << certificate_record(smdp, cert, kind);
  }
  return out.str();
}

std::string trace_csv(const FiniteSmdp& smdp, const LearningTrace& trace) {
  const FiniteMdp& mdp = smdp.base;
  const int n_atoms = smdp.n_params();
  const bool full_belief = n_atoms <= 16;
  std::ostringstream out;
  out << "t,state,action";
  if (full_belief) {
    for (int k = 0; k < n_atoms; ++k) out << ",mu_" << k;
  } else {
    out << ",mu_entropy";
    for (int i = 1; i <= 3; ++i) {
      out << ",mu_top" << i << "_atom,mu_top" << i << "_weight";
    }
  }
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    out << ",m_" << mdp.state_names()[static_cast<size_t>(mdp.pair(p).state)]
        << "." << mdp.action_names()[static_cast<size_t>(mdp.pair(p).action)];
  }
  out << "\n";
  for (const TraceRecord& rec : trace.records) {
    out << rec.t << ","
        << mdp.state_names()[static_cast<size_t>(rec.state)] << ","
        << mdp.action_names()[static_cast<size_t>(rec.action)];
    if (full_belief) {
      for (int k = 0; k < n_atoms; ++k) {
        out << "," << format_double(rec.mu.weights[k]);
      }
    } else {
      double entropy = 0.0;
      for (int k = 0; k < rec.mu.weights.size(); ++k) {
        const double w = rec.mu.weights[k];
        if (w > 0.0) entropy -= w * std::log(w);
      }
      out << "," << format_double(entropy);
      std::vector<int> order(static_cast<size_t>(rec.mu.weights.size()));
      for (size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
      std::partial_sort(order.begin(), order.begin() + 3, order.end(),
                        [&](int a, int b) {
                          if (rec.mu.weights[a] != rec.mu.weights[b]) {
                            return rec.mu.weights[a] > rec.mu.weights[b];
                          }
                          return a < b;
                        });
      for (int i = 0; i < 3; ++i) {
        out << "," << order[static_cast<size_t>(i)] << ","
            << format_double(rec.mu.weights[order[static_cast<size_t>(i)]]);
      }
    }
    for (int p = 0; p < mdp.n_pairs(); ++p) {
      out << "," << format_double(rec.m.weights[p]);
    }
    out << "\n";
  }
  return out.str();
}

std::string trace_plot_recipe(const FiniteSmdp& smdp,
                              const LearningTrace& trace,
                              const std::string& csv_name) {
  const int n_atoms = smdp.n_params();
  const bool full_belief = n_atoms <= 16;
  std::ostringstream out;
  out << "# gnuplot recipe: belief path of " << csv_name << "\n";
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead outside\n";
  out << "set logscale x\n";
  out << "set xlabel 't'\n";
  out << "set ylabel "
      << (full_belief ? "'belief weight'" : "'belief entropy'") << "\n";
  out << "plot ";
  if (full_belief) {
    for (int k = 0; k < n_atoms; ++k) {
      if (k) out << ", \\\n     ";
      out << "'" << csv_name << "' using 1:" << (4 + k) << " with lines";
    }
  } else {
    out << "'" << csv_name << "' using 1:4 with lines";
  }
  out << "\n";
  (void)trace;
  return out.str();
}

std::string run_record_text(const RunRecord& record) {
  std::ostringstream out;
  out << "[run]\n";
  out << "command: " << record.command << "\n";
  out << "config_hash: " << record.config_hash << "\n";
  out << "seeds:";
  for (uint64_t s : record.seeds) out << " " << s;
  out << "\n";
  out << "artifact_version: " << record.artifact_version << "\n";
  out << "wall_seconds: " << format_double(record.wall_seconds)
      << "  # informational; outputs are seed-deterministic\n";
  out << "outputs:\n";
  for (const auto& o : record.outputs) out << "  " << o << "\n";
  return out.str();
}

}  // namespace berknash::io
