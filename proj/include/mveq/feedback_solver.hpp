#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"
#include "mveq/policy.hpp"

namespace mveq {

/// Backward-recursion quantities of the feedback equilibrium strategy.
/// Layout as in OpenLoopTrace: N + 1 scalars, N per-stage entries.
struct FeedbackTrace {
  std::vector<double> s_tilde;     ///< S~_k, terminal 1
  std::vector<double> scal_tilde;  ///< calligraphic S~_k, terminal 0
  std::vector<double> u_tilde;     ///< U~_k, terminal -mu1/2
  std::vector<double> pi_tilde;    ///< pi~_k, terminal -mu2/2
  std::vector<Eigen::RowVectorXd> beta_tilde;
  std::vector<Eigen::MatrixXd> o_tilde;
  std::vector<Eigen::VectorXd> l_tilde;
  std::vector<Eigen::VectorXd> theta_tilde;
  /// s_k - E O_k^T O~_k^dagger L~_k
  std::vector<double> closed_loop;
  std::vector<bool> solvable;
  std::vector<double> residual_l;
  std::vector<double> residual_theta;
};

struct FeedbackSolution {
  AffinePolicy policy;  ///< K_k = Phi_k, c_k = v_k
  FeedbackTrace trace;
};

/// Feedback equilibrium strategy (Phi^t, v^t) with
///   Phi_k = -O~_k^dagger L~_k,  v_k = -O~_k^dagger theta~_k.
///
/// Returns a NonexistenceReport when O~_k is not PSD or L~_k / theta~_k leave
/// Ran(O~_k). If E O_k lies in Ran(Cov(O_k)) at every stage such a failure
/// cannot be genuine, and InternalInconsistencyError is thrown instead.
SolveResult<FeedbackSolution> solve_feedback(const ExcessMoments& moments,
                                             const MarketSpec& spec,
                                             const SolverOptions& options = {});

/// The closed-loop mean multiplier s_k - E O_k^T O~_k^dagger L~_k at stage k.
double feedback_stage_closed_loop(const FeedbackTrace& trace, int k);

}  // namespace mveq
