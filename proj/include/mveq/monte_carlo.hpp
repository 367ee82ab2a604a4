#pragma once

#include <cstdint>

#include "mveq/market_model.hpp"
#include "mveq/policy.hpp"
#include "mveq/scenario_tree.hpp"

namespace mveq {

enum class ReturnDistribution { GaussianMatched, TreeSampling };

struct MonteCarloOptions {
  ReturnDistribution distribution = ReturnDistribution::GaussianMatched;
  const ScenarioTree* tree = nullptr;  ///< required for TreeSampling
  unsigned threads = 1;
};

struct SimulationSummary {
  std::uint64_t paths = 0;
  double mean = 0.0;      ///< sample mean of X_N
  double variance = 0.0;  ///< unbiased sample variance of X_N
  double cost = 0.0;      ///< variance - (mu1 x + mu2) mean
  double mean_se = 0.0;
  double variance_se = 0.0;
  double cost_se = 0.0;

  bool operator==(const SimulationSummary&) const = default;
};

/// Simulates X_N from (policy.start_stage(), x) under u_k = K_k X_k + c_k.
///
/// Path i draws from std::mt19937_64 seeded with splitmix64(seed + i), so the
/// result does not depend on the thread count. Standard errors come from the
/// influence functions X, (X - mean)^2 and (X - mean)^2 - (mu1 x + mu2) X.
SimulationSummary simulate_monte_carlo(const MarketSpec& spec,
                                       const ExcessMoments& moments,
                                       const AffinePolicy& policy, double x,
                                       std::uint64_t n_paths, std::uint64_t seed,
                                       const MonteCarloOptions& options = {});

}  // namespace mveq
