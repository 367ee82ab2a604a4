#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"
#include "mveq/policy.hpp"

namespace mveq {

enum class PhiProvenance { UserSupplied, Sampled };

/// Pure-feedback-strategy part Phi = (Phi_0, ..., Phi_{N-1}), Phi_k in R^m.
struct PureFeedbackPart {
  std::vector<Eigen::VectorXd> phi;
  PhiProvenance provenance = PhiProvenance::UserSupplied;
  std::optional<std::uint64_t> seed;  ///< set when sampled

  static PureFeedbackPart zero(int horizon, int num_assets);
  static PureFeedbackPart user(std::vector<Eigen::VectorXd> phi);
};

/// Phi_k entries i.i.d. standard normal from std::mt19937_64(seed), filled
/// stage by stage (all of Phi_0 first).
PureFeedbackPart sample_pure_feedback(std::uint64_t seed, int horizon,
                                      int num_assets);

/// The fixed Phi used with the example preset's mixed-solution table.
PureFeedbackPart example_pure_feedback();

/// Reads Phi from a JSON array [N][m].
PureFeedbackPart parse_pure_feedback(std::string_view json_text);

struct MixedTrace {
  std::vector<double> s;     ///< S_k, terminal 1
  std::vector<double> scal;  ///< calligraphic S_k, terminal 0
  std::vector<double> t;     ///< T_k, terminal 0
  std::vector<double> tcal;  ///< calligraphic T_k, terminal 0
  std::vector<double> u;     ///< U_k, terminal -mu1/2
  std::vector<double> pi;    ///< pi_k, terminal -mu2/2
  std::vector<Eigen::RowVectorXd> beta;
  std::vector<Eigen::MatrixXd> o_mix;  ///< calligraphic O_k
  std::vector<Eigen::VectorXd> l_mix;
  std::vector<Eigen::VectorXd> theta_mix;
  std::vector<bool> solvable;
  std::vector<Eigen::VectorXd> o_eigs;  ///< ascending eigenvalues of O_k
  /// PSD status of S_{k+1}-level matrix S~cal E O E O^T + S Cov.
  std::vector<bool> s_level_psd;
  std::vector<double> residual_l;
  std::vector<double> residual_theta;
};

struct MixedSolution {
  PureFeedbackPart phi;
  /// Applied policy K_k = -O_k^dagger L_k, c_k = -O_k^dagger theta_k, carrying
  /// Phi as its pure-feedback part.
  AffinePolicy applied;
  /// Open-loop-control part v_k = open_loop_gain_k X*_k + open_loop_offset_k,
  /// with open_loop_gain_k = -(O_k^dagger L_k + Phi_k).
  std::vector<Eigen::VectorXd> open_loop_gain;
  std::vector<Eigen::VectorXd> open_loop_offset;
  MixedTrace trace;
};

SolveResult<MixedSolution> solve_mixed(const ExcessMoments& moments,
                                       const MarketSpec& spec,
                                       const PureFeedbackPart& phi,
                                       const SolverOptions& options = {});

/// E X*_t = x, ..., E X*_N along the mixed equilibrium path.
std::vector<double> mixed_equilibrium_wealth_mean(const MixedSolution& solution,
                                                  const ExcessMoments& moments,
                                                  const MarketSpec& spec);

}  // namespace mveq
