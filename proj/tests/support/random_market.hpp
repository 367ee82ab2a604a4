#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"

namespace mveq::fixtures {

struct RandomMarketOptions {
  int max_horizon = 4;
  int max_assets = 3;
  /// Probability that a stage gets a rank-deficient covariance with E O_k
  /// inside its range.
  double degenerate_probability = 0.0;
  bool random_initial_time = false;
  int min_horizon = 1;
  int min_assets = 1;
};

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd a(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) a(i, j) = normal(rng);
  }
  return a;
}

/// A valid market whose stages all satisfy the range condition.
inline MarketSpec random_market(std::uint64_t seed,
                                const RandomMarketOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> horizon(opt.min_horizon, opt.max_horizon);
  std::uniform_int_distribution<int> assets(opt.min_assets, opt.max_assets);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MarketSpec spec;
  spec.horizon = horizon(rng);
  spec.num_assets = assets(rng);
  const int m = spec.num_assets;
  for (int k = 0; k < spec.horizon; ++k) {
    const double s = 1.0 + 0.08 * unit(rng);
    Eigen::MatrixXd cov;
    Eigen::VectorXd excess;
    if (m > 1 && unit(rng) < opt.degenerate_probability) {
      const int rank = 1 + static_cast<int>(unit(rng) * (m - 1));
      const Eigen::MatrixXd a = random_matrix(rng, m, rank, 0.15);
      cov = a * a.transpose();
      excess = a * (random_matrix(rng, rank, 1, 0.5).col(0));
    } else {
      const Eigen::MatrixXd a = random_matrix(rng, m, m, 0.15);
      cov = a * a.transpose() + 0.005 * Eigen::MatrixXd::Identity(m, m);
      excess.resize(m);
      for (int i = 0; i < m; ++i) excess[i] = 0.02 + 0.18 * unit(rng);
    }
    spec.riskless.push_back(s);
    spec.mean_returns.push_back(excess + Eigen::VectorXd::Constant(m, s));
    spec.return_cov.push_back(cov);
  }
  spec.mu1 = 0.5 + 1.5 * unit(rng);
  spec.mu2 = 0.5 + 1.5 * unit(rng);
  if (opt.random_initial_time) {
    spec.initial_time = std::uniform_int_distribution<int>(0, spec.horizon - 1)(rng);
  }
  spec.initial_wealth = 0.5 + 1.5 * unit(rng);
  return validate_market_spec(std::move(spec));
}

/// Preset market with x and t overridden.
inline MarketSpec example_market() { return preset_market(kExamplePreset); }

}  // namespace mveq::fixtures
