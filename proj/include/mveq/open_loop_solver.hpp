#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"
#include "mveq/policy.hpp"

namespace mveq {

/// Backward-recursion quantities of the open-loop equilibrium control.
///
/// Scalar sequences have N + 1 entries (index N holds the terminal value);
/// per-stage sequences have N entries. Entries for stages before the start
/// stage are not computed and hold NaN / empty vectors.
struct OpenLoopTrace {
  std::vector<double> st_sum;   ///< S^_k + T^_k, terminal 1
  std::vector<double> s_hat;    ///< S^_k = s_k^2 S^_{k+1}, terminal 1
  std::vector<double> u_hat;    ///< U^_k = s_k U^_{k+1}, terminal -mu1/2
  std::vector<double> pi_hat;   ///< pi^_k = s_k pi^_{k+1}, terminal -mu2/2
  std::vector<Eigen::MatrixXd> o_hat;
  std::vector<Eigen::VectorXd> l_hat;
  std::vector<Eigen::VectorXd> theta_hat;
  std::vector<bool> range_ok;
  std::vector<double> range_residual;
};

struct OpenLoopSolution {
  AffinePolicy policy;
  OpenLoopTrace trace;
};

/// Open-loop equilibrium control for the initial pair (spec.initial_time, x).
///
/// Exists iff E O_k lies in Ran(Cov(O_k)) for every stage k >= t; otherwise a
/// NonexistenceReport(RangeCondition) names the last such stage (the first one
/// met by the backward sweep). The control at stage k is
///   u_k = -O^_k^dagger L^_k X*_k - O^_k^dagger theta^_k.
SolveResult<OpenLoopSolution> solve_open_loop(const ExcessMoments& moments,
                                              const MarketSpec& spec,
                                              const SolverOptions& options = {});

/// a_k, b_k of E X*_{k+1} = a_k E X*_k + b_k under the open-loop control.
MeanWealthCoefficients equilibrium_wealth_coefficients(
    const OpenLoopSolution& solution, const ExcessMoments& moments,
    const MarketSpec& spec);

}  // namespace mveq
