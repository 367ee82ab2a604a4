#include <map>

#include <fmt/format.h>

#include "mveq/market_model.hpp"
#include "mveq/mixed_solver.hpp"

namespace mveq {

namespace {

// Stationary market: s_k = 1.04, E e_k = (1.162, 1.246, 1.228), mu1 = mu2 = 1.
constexpr std::string_view kExampleJson = R"({
  "horizon": 4,
  "num_assets": 3,
  "riskless": 1.04,
  "mean_returns": [1.162, 1.246, 1.228],
  "return_cov": [[0.0146, 0.0187, 0.0145],
                 [0.0187, 0.0854, 0.0104],
                 [0.0145, 0.0104, 0.0289]],
  "mu1": 1.0,
  "mu2": 1.0,
  "initial_time": 0,
  "initial_wealth": 1.0
})";

const std::map<std::string, std::string_view, std::less<>>& registry() {
  static const std::map<std::string, std::string_view, std::less<>> presets{
      {std::string(kExamplePreset), kExampleJson},
      {std::string(kExamplePresetAlias), kExampleJson},
  };
  return presets;
}

}  // namespace

bool is_preset(std::string_view name) { return registry().contains(name); }

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : registry()) names.push_back(name);
  return names;
}

std::string preset_json(std::string_view name) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    throw ValidationError(fmt::format("unknown market preset '{}'", name));
  }
  return std::string(it->second);
}

MarketSpec preset_market(std::string_view name) {
  return parse_market_spec(preset_json(name));
}

PureFeedbackPart example_pure_feedback() {
  return PureFeedbackPart::user({
      (Eigen::VectorXd(3) << -0.0290, 0.1825, -1.5651).finished(),
      (Eigen::VectorXd(3) << -1.0667, 0.9337, 0.3503).finished(),
      (Eigen::VectorXd(3) << -3.0292, -0.4570, 1.2424).finished(),
      (Eigen::VectorXd(3) << -0.5078, -0.3206, 0.0125).finished(),
  });
}

}  // namespace mveq
