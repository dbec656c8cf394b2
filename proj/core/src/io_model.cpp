#include "berknash/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace berknash::io {

std::string format_double(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

[[noreturn]] void fail(const std::string& source, int line,
                       const std::string& message) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << message;
  throw std::runtime_error(msg.str());
}

double parse_number(const std::string& source, int line,
                    const std::string& token) {
  size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    fail(source, line, "expected a number, got '" + token + "'");
  }
  if (used != token.size()) {
    fail(source, line, "trailing characters in number '" + token + "'");
  }
  return value;
}

/// Splits the file into sections keyed by the bracketed headers, dropping
/// comments and blank lines. ':' separates a key token from the rest.
std::map<std::string, std::vector<Line>> split_sections(
    const std::string& text, const std::string& source) {
  std::map<std::string, std::vector<Line>> sections;
  std::istringstream in(text);
  std::string raw;
  std::string current;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::vector<std::string> tokens;
    std::istringstream ls(raw);
    std::string tok;
    while (ls >> tok) {
      // Keep "name:" usable by splitting the colon off as its own token.
      while (true) {
        const size_t colon = tok.find(':');
        if (colon == std::string::npos) {
          tokens.push_back(tok);
          break;
        }
        if (colon > 0) tokens.push_back(tok.substr(0, colon));
        tokens.push_back(":");
        tok = tok.substr(colon + 1);
        if (tok.empty()) break;
      }
    }
    if (tokens.empty()) continue;
    const std::string& head = tokens.front();
    if (head.size() >= 2 && head.front() == '[' && head.back() == ']') {
      if (tokens.size() > 1) fail(source, number, "text after section header");
      current = head.substr(1, head.size() - 2);
      if (sections.count(current)) {
        fail(source, number, "duplicate section [" + current + "]");
      }
      sections[current];
      continue;
    }
    if (current.empty()) {
      fail(source, number, "content before any section header");
    }
    sections[current].push_back(Line{number, std::move(tokens)});
  }
  return sections;
}

int lookup(const std::vector<std::string>& names, const std::string& token,
           const std::string& what, const std::string& source, int line) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == token) return static_cast<int>(i);
  }
  fail(source, line, "unknown " + what + " '" + token + "'");
}

/// Renormalizes a probability vector in place when its sum is within 1e-12
/// of one; otherwise reports the defect at the given line.
void settle_row(Vector& row, const std::string& source, int line,
                const std::string& what) {
  for (int i = 0; i < row.size(); ++i) {
    if (row[i] < 0.0) fail(source, line, what + " has a negative entry");
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > 1e-12) {
    fail(source, line,
         what + " sums to " + format_double(sum) + ", not 1 (gap above 1e-12)");
  }
  row /= sum;
}

}  // namespace

FiniteSmdp parse_model(const std::string& text, const std::string& source) {
  auto sections = split_sections(text, source);
  for (const char* required :
       {"states", "actions", "feasible", "q0", "discount", "kernel"}) {
    if (!sections.count(required)) {
      fail(source, 0, std::string("missing section [") + required + "]");
    }
  }
  for (const auto& [name, lines] : sections) {
    (void)lines;
    if (name != "states" && name != "actions" && name != "feasible" &&
        name != "q0" && name != "discount" && name != "payoff" &&
        name != "kernel" && name != "theta_grid" && name != "family") {
      fail(source, 0, "unknown section [" + name + "]");
    }
  }
  if (sections.count("theta_grid") != sections.count("family")) {
    fail(source, 0, "theta_grid and family must appear together");
  }

  std::vector<std::string> states;
  for (const Line& l : sections["states"]) {
    for (const auto& t : l.tokens) {
      if (t == ":") fail(source, l.number, "state names cannot contain ':'");
      states.push_back(t);
    }
  }
  std::vector<std::string> actions;
  for (const Line& l : sections["actions"]) {
    for (const auto& t : l.tokens) {
      if (t == ":") fail(source, l.number, "action names cannot contain ':'");
      actions.push_back(t);
    }
  }
  if (states.empty()) fail(source, 0, "no states listed");
  if (actions.empty()) fail(source, 0, "no actions listed");
  const int n_states = static_cast<int>(states.size());
  const int n_actions = static_cast<int>(actions.size());

  std::vector<std::vector<int>> feasible(static_cast<size_t>(n_states));
  std::vector<bool> seen_feasible(static_cast<size_t>(n_states), false);
  for (const Line& l : sections["feasible"]) {
    if (l.tokens.size() < 3 || l.tokens[1] != ":") {
      fail(source, l.number, "expected 'state: action ...'");
    }
    const int s = lookup(states, l.tokens[0], "state", source, l.number);
    if (seen_feasible[static_cast<size_t>(s)]) {
      fail(source, l.number, "state '" + l.tokens[0] + "' listed twice");
    }
    seen_feasible[static_cast<size_t>(s)] = true;
    for (size_t i = 2; i < l.tokens.size(); ++i) {
      feasible[static_cast<size_t>(s)].push_back(
          lookup(actions, l.tokens[i], "action", source, l.number));
    }
  }
  for (int s = 0; s < n_states; ++s) {
    if (!seen_feasible[static_cast<size_t>(s)]) {
      fail(source, 0, "state '" + states[static_cast<size_t>(s)] +
                          "' has no feasible actions");
    }
  }

  Vector initial = Vector::Zero(n_states);
  int q0_line = 0;
  for (const Line& l : sections["q0"]) {
    if (l.tokens.size() != 3 || l.tokens[1] != ":") {
      fail(source, l.number, "expected 'state: probability'");
    }
    const int s = lookup(states, l.tokens[0], "state", source, l.number);
    initial[s] = parse_number(source, l.number, l.tokens[2]);
    q0_line = l.number;
  }
  settle_row(initial, source, q0_line, "initial distribution");

  const auto& disc_lines = sections["discount"];
  if (disc_lines.size() != 1 || disc_lines[0].tokens.size() != 1) {
    fail(source, disc_lines.empty() ? 0 : disc_lines[0].number,
         "discount must be a single number");
  }
  const double discount =
      parse_number(source, disc_lines[0].number, disc_lines[0].tokens[0]);

  // Pair indexing in state-major order, mirroring FiniteMdp.
  std::vector<int> offset(static_cast<size_t>(n_states), 0);
  int n_pairs = 0;
  for (int s = 0; s < n_states; ++s) {
    offset[static_cast<size_t>(s)] = n_pairs;
    n_pairs += static_cast<int>(feasible[static_cast<size_t>(s)].size());
  }
  auto pair_of = [&](int s, int x, int line) {
    const auto& f = feasible[static_cast<size_t>(s)];
    for (size_t i = 0; i < f.size(); ++i) {
      if (f[i] == x) return offset[static_cast<size_t>(s)] + static_cast<int>(i);
    }
    fail(source, line, "pair (" + states[static_cast<size_t>(s)] + ", " +
                           actions[static_cast<size_t>(x)] +
                           ") is not feasible");
  };

  Matrix payoff = Matrix::Zero(n_pairs, n_states);
  if (sections.count("payoff")) {
    for (const Line& l : sections["payoff"]) {
      if (l.tokens.size() != 4) {
        fail(source, l.number, "expected 'state action next_state value'");
      }
      const int s = lookup(states, l.tokens[0], "state", source, l.number);
      const int x = lookup(actions, l.tokens[1], "action", source, l.number);
      const int sn = lookup(states, l.tokens[2], "state", source, l.number);
      payoff(pair_of(s, x, l.number), sn) =
          parse_number(source, l.number, l.tokens[3]);
    }
  }

  Matrix kernel = Matrix::Zero(n_pairs, n_states);
  std::vector<bool> seen_pair(static_cast<size_t>(n_pairs), false);
  for (const Line& l : sections["kernel"]) {
    if (static_cast<int>(l.tokens.size()) != 2 + n_states) {
      fail(source, l.number,
           "expected 'state action' followed by " +
               std::to_string(n_states) + " probabilities");
    }
    const int s = lookup(states, l.tokens[0], "state", source, l.number);
    const int x = lookup(actions, l.tokens[1], "action", source, l.number);
    const int p = pair_of(s, x, l.number);
    if (seen_pair[static_cast<size_t>(p)]) {
      fail(source, l.number, "duplicate kernel row");
    }
    seen_pair[static_cast<size_t>(p)] = true;
    Vector row(n_states);
    for (int i = 0; i < n_states; ++i) {
      row[i] = parse_number(source, l.number, l.tokens[size_t(2 + i)]);
    }
    settle_row(row, source, l.number, "kernel row");
    kernel.row(p) = row.transpose();
  }
  for (int p = 0; p < n_pairs; ++p) {
    if (!seen_pair[static_cast<size_t>(p)]) {
      fail(source, 0, "kernel row missing for some feasible pair");
    }
  }

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(states, actions, feasible, std::move(initial),
                        std::move(kernel), std::move(payoff), discount);

  if (sections.count("theta_grid")) {
    const auto& grid_lines = sections["theta_grid"];
    if (grid_lines.empty()) fail(source, 0, "theta_grid is empty");
    const int dim = static_cast<int>(grid_lines[0].tokens.size());
    Matrix params(static_cast<Eigen::Index>(grid_lines.size()), dim);
    for (size_t k = 0; k < grid_lines.size(); ++k) {
      const Line& l = grid_lines[k];
      if (static_cast<int>(l.tokens.size()) != dim) {
        fail(source, l.number, "parameter vectors must share a dimension");
      }
      for (int d = 0; d < dim; ++d) {
        params(static_cast<Eigen::Index>(k), d) =
            parse_number(source, l.number, l.tokens[static_cast<size_t>(d)]);
      }
    }
    const int n_atoms = static_cast<int>(grid_lines.size());
    std::vector<Matrix> kernels(static_cast<size_t>(n_atoms),
                                Matrix::Zero(n_pairs, n_states));
    std::vector<std::vector<bool>> seen(
        static_cast<size_t>(n_atoms),
        std::vector<bool>(static_cast<size_t>(n_pairs), false));
    for (const Line& l : sections["family"]) {
      if (static_cast<int>(l.tokens.size()) != 3 + n_states) {
        fail(source, l.number,
             "expected 'atom_index state action' followed by " +
                 std::to_string(n_states) + " probabilities");
      }
      const double kf = parse_number(source, l.number, l.tokens[0]);
      const int k = static_cast<int>(kf);
      if (kf != k || k < 0 || k >= n_atoms) {
        fail(source, l.number, "atom index out of range");
      }
      const int s = lookup(states, l.tokens[1], "state", source, l.number);
      const int x = lookup(actions, l.tokens[2], "action", source, l.number);
      const int p = pair_of(s, x, l.number);
      if (seen[static_cast<size_t>(k)][static_cast<size_t>(p)]) {
        fail(source, l.number, "duplicate family row");
      }
      seen[static_cast<size_t>(k)][static_cast<size_t>(p)] = true;
      Vector row(n_states);
      for (int i = 0; i < n_states; ++i) {
        row[i] = parse_number(source, l.number, l.tokens[size_t(3 + i)]);
      }
      settle_row(row, source, l.number, "family row");
      kernels[static_cast<size_t>(k)].row(p) = row.transpose();
    }
    for (int k = 0; k < n_atoms; ++k) {
      for (int p = 0; p < n_pairs; ++p) {
        if (!seen[static_cast<size_t>(k)][static_cast<size_t>(p)]) {
          fail(source, 0, "family row missing for atom " + std::to_string(k));
        }
      }
    }
    smdp.family = std::make_shared<DenseFamily>(std::move(params),
                                                std::move(kernels));
  }

  const ValidationReport report =
      smdp.family ? validate(smdp) : validate(smdp.base);
  if (!report.ok()) fail(source, 0, report.to_string());
  return smdp;
}

FiniteSmdp load_model(const std::string& path) {
  return parse_model(read_text_file(path), path);
}

std::string serialize_model(const FiniteSmdp& smdp) {
  const FiniteMdp& mdp = smdp.base;
  std::ostringstream out;
  out << "[states]\n";
  for (const auto& s : mdp.state_names()) out << s << "\n";
  out << "\n[actions]\n";
  for (const auto& a : mdp.action_names()) out << a << "\n";
  out << "\n[feasible]\n";
  for (int s = 0; s < mdp.n_states(); ++s) {
    out << mdp.state_names()[static_cast<size_t>(s)] << ":";
    for (int x : mdp.feasible(s)) {
      out << " " << mdp.action_names()[static_cast<size_t>(x)];
    }
    out << "\n";
  }
  out << "\n[q0]\n";
  for (int s = 0; s < mdp.n_states(); ++s) {
    out << mdp.state_names()[static_cast<size_t>(s)] << ": "
        << format_double(mdp.initial()[s]) << "\n";
  }
  out << "\n[discount]\n" << format_double(mdp.discount()) << "\n";
  out << "\n[payoff]\n";
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    for (int sn = 0; sn < mdp.n_states(); ++sn) {
      if (mdp.payoff()(p, sn) == 0.0) continue;
      out << mdp.state_names()[static_cast<size_t>(mdp.pair(p).state)] << " "
          << mdp.action_names()[static_cast<size_t>(mdp.pair(p).action)] << " "
          << mdp.state_names()[static_cast<size_t>(sn)] << " "
          << format_double(mdp.payoff()(p, sn)) << "\n";
    }
  }
  out << "\n[kernel]\n";
  for (int p = 0; p < mdp.n_pairs(); ++p) {
    out << mdp.state_names()[static_cast<size_t>(mdp.pair(p).state)] << " "
        << mdp.action_names()[static_cast<size_t>(mdp.pair(p).action)];
    for (int sn = 0; sn < mdp.n_states(); ++sn) {
      out << " " << format_double(mdp.kernel()(p, sn));
    }
    out << "\n";
  }
  if (smdp.family) {
    out << "\n[theta_grid]\n";
    for (int k = 0; k < smdp.family->size(); ++k) {
      const Vector param = smdp.family->parameter(k);
      for (int d = 0; d < param.size(); ++d) {
        out << (d ? " " : "") << format_double(param[d]);
      }
      out << "\n";
    }
    out << "\n[family]\n";
    Vector row(mdp.n_states());
    for (int k = 0; k < smdp.family->size(); ++k) {
      for (int p = 0; p < mdp.n_pairs(); ++p) {
        smdp.family->row(k, p, row);
        out << k << " "
            << mdp.state_names()[static_cast<size_t>(mdp.pair(p).state)] << " "
            << mdp.action_names()[static_cast<size_t>(mdp.pair(p).action)];
        for (int sn = 0; sn < mdp.n_states(); ++sn) {
          out << " " << format_double(row[sn]);
        }
        out << "\n";
      }
    }
  }
  return out.str();
}

void save_model(const FiniteSmdp& smdp, const std::string& path) {
  write_text_file(path, serialize_model(smdp));
}

bool models_equal(const FiniteSmdp& a, const FiniteSmdp& b, double tol) {
  const FiniteMdp& ma = a.base;
  const FiniteMdp& mb = b.base;
  if (ma.state_names() != mb.state_names()) return false;
  if (ma.action_names() != mb.action_names()) return false;
  if (ma.feasible() != mb.feasible()) return false;
  if (ma.discount() != mb.discount()) return false;
  auto close = [tol](double x, double y) { return std::abs(x - y) <= tol; };
  for (int s = 0; s < ma.n_states(); ++s) {
    if (!close(ma.initial()[s], mb.initial()[s])) return false;
  }
  for (int p = 0; p < ma.n_pairs(); ++p) {
    for (int sn = 0; sn < ma.n_states(); ++sn) {
      if (!close(ma.kernel()(p, sn), mb.kernel()(p, sn))) return false;
      if (!close(ma.payoff()(p, sn), mb.payoff()(p, sn))) return false;
    }
  }
  const bool fa = a.family != nullptr;
  const bool fb = b.family != nullptr;
  if (fa != fb) return false;
  if (!fa) return true;
  if (a.family->size() != b.family->size()) return false;
  if (a.family->param_dim() != b.family->param_dim()) return false;
  Vector ra(ma.n_states()), rb(ma.n_states());
  for (int k = 0; k < a.family->size(); ++k) {
    const Vector pa = a.family->parameter(k);
    const Vector pb = b.family->parameter(k);
    for (int d = 0; d < pa.size(); ++d) {
      if (!close(pa[d], pb[d])) return false;
    }
    for (int p = 0; p < ma.n_pairs(); ++p) {
      a.family->row(k, p, ra);
      b.family->row(k, p, rb);
      for (int sn = 0; sn < ma.n_states(); ++sn) {
        if (!close(ra[sn], rb[sn])) return false;
      }
    }
  }
  return true;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace berknash::io
