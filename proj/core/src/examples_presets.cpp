#include "berknash/examples.hpp"

#include <sstream>
#include <stdexcept>

namespace berknash::examples {

namespace {

/// Repeated coin flip: one state pair per outcome, a single action, true
/// heads probability one half. The three-atom grid contains the truth; the
/// two-atom variant straddles it symmetrically, so both atoms fit equally
/// well and beliefs have no reason to settle.
FiniteSmdp coin_build(bool include_truth) {
  std::vector<std::string> states = {"tails", "heads"};
  std::vector<std::string> actions = {"flip"};
  std::vector<std::vector<int>> feasible = {{0}, {0}};
  Vector initial(2);
  initial << 0.5, 0.5;
  Matrix kernel(2, 2);
  kernel << 0.5, 0.5, 0.5, 0.5;
  Matrix payoff = Matrix::Zero(2, 2);
  payoff.col(1).setConstant(1.0);

  std::vector<double> heads =
      include_truth ? std::vector<double>{0.25, 0.5, 0.75}
                    : std::vector<double>{0.25, 0.75};
  Matrix params(static_cast<Eigen::Index>(heads.size()), 1);
  std::vector<Matrix> kernels;
  for (size_t k = 0; k < heads.size(); ++k) {
    params(static_cast<Eigen::Index>(k), 0) = heads[k];
    Matrix m(2, 2);
    m << 1.0 - heads[k], heads[k], 1.0 - heads[k], heads[k];
    kernels.push_back(std::move(m));
  }

  FiniteSmdp smdp;
  smdp.base = FiniteMdp(std::move(states), std::move(actions),
                        std::move(feasible), std::move(initial),
                        std::move(kernel), std::move(payoff), 0.5);
  smdp.family =
      std::make_shared<DenseFamily>(std::move(params), std::move(kernels));
  return smdp;
}

}  // namespace

FiniteSmdp build_preset(const std::string& name) {
  if (name == "monopoly-default") return monopoly_build(MonopolyParams{});
  if (name == "search-default") return search_build(search_default_params());
  if (name == "growth-default") return growth_build(growth_default_params());
  if (name == "growth-small") return growth_build(growth_small_params());
  if (name == "experimentation-075") return experimentation_build(0.75);
  if (name == "coin-default") return coin_build(true);
  if (name == "coin-ambiguous") return coin_build(false);
  std::ostringstream msg;
  msg << "unknown preset '" << name << "'; known presets:";
  for (const auto& n : preset_names()) msg << ' ' << n;
  throw std::invalid_argument(msg.str());
}

std::vector<std::string> preset_names() {
  return {"monopoly-default", "search-default",      "growth-default",
          "growth-small",     "experimentation-075", "coin-default",
          "coin-ambiguous"};
}

}  // namespace berknash::examples
