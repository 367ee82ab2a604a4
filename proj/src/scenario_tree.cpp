#include "mveq/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "mveq/numerics.hpp"

namespace mveq {

namespace {

constexpr double kProbabilitySumTol = 1e-12;

// Columns: orthonormal basis of the complement of 1 in R^{r+1} (Helmert).
Eigen::MatrixXd helmert_basis(int r) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(r + 1, r);
  for (int j = 1; j <= r; ++j) {
    const double norm = std::sqrt(static_cast<double>(j) * (j + 1));
    for (int i = 0; i < j; ++i) b(i, j - 1) = 1.0 / norm;
    b(j, j - 1) = -static_cast<double>(j) / norm;
  }
  return b;
}

Eigen::MatrixXd random_orthogonal(int r, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(r, r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) g(i, j) = normal(engine);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < r; ++j) {
    if (rr(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

ScenarioTree::ScenarioTree(std::vector<std::vector<Atom>> stages)
    : stages_(std::move(stages)) {
  if (!stages_.empty() && !stages_.front().empty()) {
    num_assets_ = static_cast<int>(stages_.front().front().excess.size());
  }
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const auto& atoms = stages_[k];
    if (atoms.empty()) {
      throw std::invalid_argument(fmt::format("stage {} has no atoms", k));
    }
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.excess.size() != num_assets_) {
        throw std::invalid_argument(
            fmt::format("stage {}: atom dimension {} != {}", k, a.excess.size(),
                        num_assets_));
      }
      if (!(a.probability > 0.0) || !a.excess.allFinite()) {
        throw std::invalid_argument(fmt::format(
            "stage {}: atoms need positive probability and finite excess", k));
      }
      total += a.probability;
    }
    if (std::abs(total - 1.0) > kProbabilitySumTol) {
      throw std::invalid_argument(
          fmt::format("stage {}: probabilities sum to {:.15g}", k, total));
    }
  }
}

Eigen::VectorXd ScenarioTree::implied_mean(int k) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(num_assets_);
  for (const auto& a : atoms(k)) mean += a.probability * a.excess;
  return mean;
}

Eigen::MatrixXd ScenarioTree::implied_cov(int k) const {
  const Eigen::VectorXd mean = implied_mean(k);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(num_assets_, num_assets_);
  for (const auto& a : atoms(k)) {
    const Eigen::VectorXd d = a.excess - mean;
    cov += a.probability * d * d.transpose();
  }
  return cov;
}

std::uint64_t ScenarioTree::leaf_count(int from_stage) const {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t count = 1;
  for (int k = std::max(from_stage, 0); k < horizon(); ++k) {
    const auto n = static_cast<std::uint64_t>(atoms(k).size());
    if (count > kMax / n) return kMax;
    count *= n;
  }
  return count;
}

int minimum_atoms(const Eigen::MatrixXd& cov) {
  return static_cast<int>(numerics::psd_factor(cov).cols()) + 1;
}

ScenarioTree build_matched_tree(const ExcessMoments& moments,
                                int atoms_per_stage,
                                std::optional<std::uint64_t> rotation_seed) {
  std::optional<std::mt19937_64> engine;
  if (rotation_seed) engine.emplace(*rotation_seed);

  std::vector<std::vector<Atom>> stages;
  for (int k = 0; k < moments.horizon(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const Eigen::VectorXd& mean = moments.mean_excess[uk];
    Eigen::MatrixXd f = numerics::psd_factor(moments.cov_excess[uk]);
    const int r = static_cast<int>(f.cols());
    if (atoms_per_stage < r + 1) {
      throw InfeasibleTreeError(fmt::format(
          "stage {}: covariance of rank {} needs at least {} atoms, got {}", k,
          r, r + 1, atoms_per_stage));
    }
    if (engine && r > 0) f = f * random_orthogonal(r, *engine);

    std::vector<Atom> atoms;
    if (r == 0) {
      atoms.push_back({1.0, mean});
    } else if (atoms_per_stage >= 2 * r + 1) {
      const double p = 1.0 / (2 * r + 1);
      const double scale = std::sqrt((2.0 * r + 1.0) / 2.0);
      atoms.push_back({p, mean});
      for (int j = 0; j < r; ++j) {
        atoms.push_back({p, mean + scale * f.col(j)});
        atoms.push_back({p, mean - scale * f.col(j)});
      }
    } else if (atoms_per_stage == 2 * r) {
      const double p = 1.0 / (2 * r);
      const double scale = std::sqrt(static_cast<double>(r));
      for (int j = 0; j < r; ++j) {
        atoms.push_back({p, mean + scale * f.col(j)});
        atoms.push_back({p, mean - scale * f.col(j)});
      }
    } else {
      const double p = 1.0 / (r + 1);
      const Eigen::MatrixXd v =
          std::sqrt(static_cast<double>(r + 1)) * f * helmert_basis(r).transpose();
      for (int i = 0; i <= r; ++i) atoms.push_back({p, mean + v.col(i)});
    }
    // Equal weights must sum to 1 exactly for the constructor check.
    double total = 0.0;
    for (const auto& a : atoms) total += a.probability;
    atoms.back().probability += 1.0 - total;
    stages.push_back(std::move(atoms));
  }
  return ScenarioTree(std::move(stages));
}

}  // namespace mveq
