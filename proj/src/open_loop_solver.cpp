#include "mveq/open_loop_solver.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace mveq {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

SolveResult<OpenLoopSolution> solve_open_loop(const ExcessMoments& moments,
                                              const MarketSpec& spec,
                                              const SolverOptions& options) {
  const int n = spec.horizon;
  const int t = spec.initial_time;
  const auto un = static_cast<std::size_t>(n);

  OpenLoopTrace tr;
  tr.st_sum.assign(un + 1, kNaN);
  tr.s_hat.assign(un + 1, kNaN);
  tr.u_hat.assign(un + 1, kNaN);
  tr.pi_hat.assign(un + 1, kNaN);
  tr.o_hat.resize(un);
  tr.l_hat.resize(un);
  tr.theta_hat.resize(un);
  tr.range_ok.assign(un, false);
  tr.range_residual.assign(un, kNaN);

  tr.st_sum[un] = 1.0;
  tr.s_hat[un] = 1.0;
  tr.u_hat[un] = -0.5 * spec.mu1;
  tr.pi_hat[un] = -0.5 * spec.mu2;

  std::vector<Eigen::VectorXd> gains(un - static_cast<std::size_t>(t));
  std::vector<Eigen::VectorXd> offsets(gains.size());

  for (int k = n - 1; k >= t; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const double s = spec.riskless[uk];
    const Eigen::VectorXd& e = moments.mean_excess[uk];
    const Eigen::MatrixXd& cov = moments.cov_excess[uk];
    const double st_next = tr.st_sum[uk + 1];

    // With S^+T^ > 0 at k+1, L^_k in Ran(O^_k) iff E O_k in Ran(Cov(O_k)).
    if (!(st_next > 0.0)) {
      throw InternalInconsistencyError(fmt::format(
          "S^+T^ = {} is not positive at stage {}", st_next, k + 1));
    }
    const auto range = numerics::range_membership(e, cov, options.range_tol,
                                                  options.pinv_tol);
    tr.range_residual[uk] = range.residual;
    tr.range_ok[uk] = range.member;
    if (!range.member) {
      return NonexistenceReport{k, FailingCondition::RangeCondition,
                                range.residual, options.range_tol};
    }

    const double tail = riskless_growth(spec, k + 1);
    tr.l_hat[uk] = -0.5 * spec.mu1 * tail * e;
    tr.theta_hat[uk] = -0.5 * spec.mu2 * tail * e;
    tr.o_hat[uk] = st_next * cov;

    const Eigen::MatrixXd o_pinv =
        numerics::pseudoinverse(tr.o_hat[uk], options.pinv_tol).pinv;
    const Eigen::VectorXd gain = -o_pinv * tr.l_hat[uk];
    gains[uk - static_cast<std::size_t>(t)] = gain;
    offsets[uk - static_cast<std::size_t>(t)] = -o_pinv * tr.theta_hat[uk];

    // (S^+T^)_k = (S^+T^)_{k+1} s^2 - s (S^+T^)_{k+1} E O^T O^dagger L^
    tr.st_sum[uk] = st_next * s * s + s * st_next * e.dot(gain);
    tr.s_hat[uk] = s * s * tr.s_hat[uk + 1];
    tr.u_hat[uk] = s * tr.u_hat[uk + 1];
    tr.pi_hat[uk] = s * tr.pi_hat[uk + 1];
  }

  return OpenLoopSolution{
      AffinePolicy(PolicyKind::OpenLoop, t, std::move(gains), std::move(offsets)),
      std::move(tr)};
}

MeanWealthCoefficients equilibrium_wealth_coefficients(
    const OpenLoopSolution& solution, const ExcessMoments& moments,
    const MarketSpec& spec) {
  return mean_wealth_coefficients(solution.policy, moments, spec);
}

}  // namespace mveq
