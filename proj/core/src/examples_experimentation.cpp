#include "berknash/examples.hpp"

#include <cmath>
#include <stdexcept>

namespace berknash::examples {

// State roster. From "start" the agent picks one of four actions; "armA" and
// "armB" are the continuation nodes after buying information, reached only
// when the respective parameter atom is the active one; "win"/"lose" absorb
// risky outcomes so the reward can live on the transition; "done" absorbs
// everything else.
namespace {
enum State { kStart, kArmA, kArmB, kWin, kLose, kDone };
}

FiniteSmdp experimentation_build(double delta, double true_theta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("experimentation: delta must lie in [0,1)");
  }
  if (true_theta != 0.0 && true_theta != 1.0) {
    throw std::invalid_argument(
        "experimentation: true_theta must be exactly 0 or 1");
  }

  std::vector<std::string> states = {"start", "armA", "armB",
                                     "win",   "lose", "done"};
  // Actions at "start": back arm A outright, back arm B outright, take the
  // safe payout, or buy the signal. At the continuation nodes: stay safe or
  // go risky. The absorbing states share a single "wait" action.
  std::vector<std::string> actions = {"backA", "backB", "safe",
                                      "signal", "risky", "wait"};
  std::vector<std::vector<int>> feasible = {
      {0, 1, 2, 3},  // start
      {2, 4},        // armA
      {2, 4},        // armB
      {5}, {5}, {5},
  };

  // Dense pair index in state-major order, matching FiniteMdp's layout.
  int n_pairs = 0;
  std::vector<int> offset;
  for (const auto& f : feasible) {
    offset.push_back(n_pairs);
    n_pairs += static_cast<int>(f.size());
  }
  auto pair = [&](int s, int x) {
    const auto& f = feasible[static_cast<size_t>(s)];
    for (size_t i = 0; i < f.size(); ++i) {
      if (f[i] == x) return offset[static_cast<size_t>(s)] + static_cast<int>(i);
    }
    throw std::logic_error("experimentation: infeasible pair requested");
  };

  const int n_states = 6;
  Matrix kernel = Matrix::Zero(n_pairs, n_states);
  Matrix payoff = Matrix::Zero(n_pairs, n_states);

  // Payoffs: backing arm A pays 1 via "win" when the parameter is 0,
  // backing arm B pays 1 when it is 1. The safe action pays 2/3. Buying the
  // signal costs 1/3 and reveals the parameter through which continuation
  // node appears: parameter 1 leads to armA, where the risky bet is the one
  // that parameter makes worthless. An updating agent therefore always ends
  // the signal branch on the safe 2/3, while a frozen belief prices the
  // risky continuation by its prior and overvalues the branch.
  const bool a_active = true_theta == 1.0;

  // True transitions out of "start".
  kernel(pair(kStart, 0), a_active ? kLose : kWin) = 1.0;
  kernel(pair(kStart, 1), a_active ? kWin : kLose) = 1.0;
  kernel(pair(kStart, 2), kDone) = 1.0;
  kernel(pair(kStart, 3), a_active ? kArmA : kArmB) = 1.0;
  payoff(pair(kStart, 0), kWin) = 1.0;
  payoff(pair(kStart, 0), kLose) = 0.0;
  payoff(pair(kStart, 1), kWin) = 1.0;
  payoff(pair(kStart, 1), kLose) = 0.0;
  payoff(pair(kStart, 2), kDone) = 2.0 / 3.0;
  payoff(pair(kStart, 3), kArmA) = -1.0 / 3.0;
  payoff(pair(kStart, 3), kArmB) = -1.0 / 3.0;

  // Continuation nodes: safe pays 2/3; the risky bet at armA wins only
  // under parameter 0, the one at armB only under parameter 1.
  for (int node : {kArmA, kArmB}) {
    kernel(pair(node, 2), kDone) = 1.0;
    payoff(pair(node, 2), kDone) = 2.0 / 3.0;
    const bool risky_wins = (node == kArmA) ? !a_active : a_active;
    kernel(pair(node, 4), risky_wins ? kWin : kLose) = 1.0;
    payoff(pair(node, 4), kWin) = 3.0;
    payoff(pair(node, 4), kLose) = 0.0;
  }
  for (int s : {kWin, kLose, kDone}) {
    kernel(pair(s, 5), kDone) = 1.0;
  }

  Vector initial = Vector::Zero(n_states);
  initial[kStart] = 1.0;

  // The family has one kernel per parameter value. Parameter 1 routes the
  // start actions as above; parameter 0 swaps every parameter-dependent
  // branch. Shared rows stay identical so the agent can only learn from the
  // branching states.
  Matrix k1 = Matrix::Zero(n_pairs, n_states);
  Matrix k0 = Matrix::Zero(n_pairs, n_states);
  for (Matrix* k : {&k1, &k0}) {
    const bool active = (k == &k1);
    (*k)(pair(kStart, 0), active ? kLose : kWin) = 1.0;
    (*k)(pair(kStart, 1), active ? kWin : kLose) = 1.0;
    (*k)(pair(kStart, 2), kDone) = 1.0;
    (*k)(pair(kStart, 3), active ? kArmA : kArmB) = 1.0;
    for (int node : {kArmA, kArmB}) {
      (*k)(pair(node, 2), kDone) = 1.0;
      const bool risky_wins = (node == kArmA) ? !active : active;
      (*k)(pair(node, 4), risky_wins ? kWin : kLose) = 1.0;
    }
    for (int s : {kWin, kLose, kDone}) (*k)(pair(s, 5), kDone) = 1.0;
  }

  std::vector<Matrix> atom_kernels = {std::move(k0), std::move(k1)};
  Matrix params(2, 1);
  params << 0.0, 1.0;

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(std::move(states), std::move(actions),
                        std::move(feasible), std::move(initial),
                        std::move(kernel), std::move(payoff), delta);
  smdp.family = std::make_shared<DenseFamily>(std::move(params),
                                              std::move(atom_kernels));
  return smdp;
}

}  // namespace berknash::examples
