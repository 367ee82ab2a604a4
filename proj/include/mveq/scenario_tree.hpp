#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"

namespace mveq {

struct Atom {
  double probability = 0.0;
  Eigen::VectorXd excess;  ///< realised O_k
};

/// Finite-support excess returns, independent across stages (a product tree).
class ScenarioTree {
 public:
  ScenarioTree() = default;
  /// Throws std::invalid_argument unless every stage has atoms of a common
  /// dimension with positive probabilities summing to 1 within 1e-12.
  explicit ScenarioTree(std::vector<std::vector<Atom>> stages);

  int horizon() const { return static_cast<int>(stages_.size()); }
  int num_assets() const { return num_assets_; }
  const std::vector<Atom>& atoms(int k) const {
    return stages_.at(static_cast<std::size_t>(k));
  }

  Eigen::VectorXd implied_mean(int k) const;
  Eigen::MatrixXd implied_cov(int k) const;

  /// Number of root-to-leaf paths through stages k, ..., N-1 (saturating).
  std::uint64_t leaf_count(int from_stage) const;

 private:
  std::vector<std::vector<Atom>> stages_;
  int num_assets_ = 0;
};

class InfeasibleTreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Smallest admissible atoms_per_stage for a covariance of numerical rank r:
/// r + 1 (one atom when r = 0).
int minimum_atoms(const Eigen::MatrixXd& cov);

/// Equal-weight sigma-point tree matching E O_k and Cov(O_k) exactly.
///
/// With r = rank Cov(O_k) and F a spectral square-root factor (m x r):
///   atoms >= 2r + 1: mean and mean +- sqrt((2r+1)/2) F_j, weights 1/(2r+1);
///   atoms == 2r:     mean +- sqrt(r) F_j, weights 1/(2r);
///   r+1 <= atoms:    regular simplex, mean + sqrt(r+1) F H e_i, weights 1/(r+1).
/// A seed rotates F by a random orthogonal matrix, which leaves both moments
/// unchanged.
ScenarioTree build_matched_tree(
    const ExcessMoments& moments, int atoms_per_stage,
    std::optional<std::uint64_t> rotation_seed = std::nullopt);

}  // namespace mveq
