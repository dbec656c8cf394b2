#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "berknash/equilibrium.hpp"
#include "berknash/learning.hpp"
#include "berknash/model.hpp"

namespace berknash::io {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

// ---------------------------------------------------------------------------
// Model files. Sectioned plain text:
//
//   [states]      one name per line
//   [actions]     one name per line
//   [feasible]    state: action action ...
//   [q0]          state: probability
//   [discount]    one number
//   [payoff]      state action next_state value   (missing rows are 0)
//   [kernel]      state action p(next_1) ... p(next_n)
//   [theta_grid]  one parameter vector per line
//   [family]      atom_index state action p(next_1) ... p(next_n)
//
// '#' starts a comment; names are whitespace-free tokens. Probability rows
// whose sum is within 1e-12 of 1 are renormalized silently; larger gaps are
// errors. All errors carry "source:line:" prefixes. theta_grid and family
// may be omitted together, producing a model with no subjective family.
// ---------------------------------------------------------------------------

FiniteSmdp parse_model(const std::string& text,
                       const std::string& source = "model");
FiniteSmdp load_model(const std::string& path);
std::string serialize_model(const FiniteSmdp& smdp);
void save_model(const FiniteSmdp& smdp, const std::string& path);

/// Field-by-field numeric equality; family compared row by row.
bool models_equal(const FiniteSmdp& a, const FiniteSmdp& b, double tol = 0.0);

// ---------------------------------------------------------------------------
// Result records.
// ---------------------------------------------------------------------------

/// One certificate as a key: value block, with residuals, tolerances, the
/// strategy floor, flags, and the full (sigma, m, mu) triple spelled out
/// against the model's names.
std::string certificate_record(const FiniteSmdp& smdp,
                               const EquilibriumCertificate& cert,
                               const std::string& kind);

/// Concatenates certificate records under a header that counts them and
/// carries any search warnings.
std::string certificates_file(const FiniteSmdp& smdp,
                              const std::vector<EquilibriumCertificate>& certs,
                              const std::string& kind,
                              const std::vector<std::string>& warnings = {});

/// Learning trace as CSV. Columns: t, state, action, then the belief
/// (per-atom weights when the grid has at most 16 atoms, otherwise entropy
/// plus the top three atoms), then the empirical pair frequency. One row per
/// stored record.
std::string trace_csv(const FiniteSmdp& smdp, const LearningTrace& trace);

/// Companion gnuplot script that plots the belief columns of the CSV
/// against time.
std::string trace_plot_recipe(const FiniteSmdp& smdp,
                              const LearningTrace& trace,
                              const std::string& csv_name);

/// Provenance sidecar for a command invocation. The listed output artifacts
/// are byte-for-byte reproducible given the same command and seeds; the wall
/// time is informational only.
struct RunRecord {
  std::string command;
  uint64_t config_hash = 0;
  std::vector<uint64_t> seeds;
  double wall_seconds = 0.0;
  std::string artifact_version = "1";
  std::vector<std::string> outputs;
};

std::string run_record_text(const RunRecord& record);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace berknash::io
