#include "mveq/feedback_solver.hpp"

#include <cassert>
#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace mveq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double relative_range_residual(const Eigen::MatrixXd& m,
                               const Eigen::MatrixXd& m_pinv,
                               const Eigen::VectorXd& v) {
  return (m * (m_pinv * v) - v).norm() / std::max(1.0, v.norm());
}

}  // namespace

SolveResult<FeedbackSolution> solve_feedback(const ExcessMoments& moments,
                                             const MarketSpec& spec,
                                             const SolverOptions& options) {
  const int n = spec.horizon;
  const int t = spec.initial_time;
  const auto un = static_cast<std::size_t>(n);

  FeedbackTrace tr;
  tr.s_tilde.assign(un + 1, kNaN);
  tr.scal_tilde.assign(un + 1, kNaN);
  tr.u_tilde.assign(un + 1, kNaN);
  tr.pi_tilde.assign(un + 1, kNaN);
  tr.beta_tilde.resize(un);
  tr.o_tilde.resize(un);
  tr.l_tilde.resize(un);
  tr.theta_tilde.resize(un);
  tr.closed_loop.assign(un, kNaN);
  tr.solvable.assign(un, false);
  tr.residual_l.assign(un, kNaN);
  tr.residual_theta.assign(un, kNaN);

  tr.s_tilde[un] = 1.0;
  tr.scal_tilde[un] = 0.0;
  tr.u_tilde[un] = -0.5 * spec.mu1;
  tr.pi_tilde[un] = -0.5 * spec.mu2;

  std::vector<Eigen::VectorXd> gains(un - static_cast<std::size_t>(t));
  std::vector<Eigen::VectorXd> offsets(gains.size());

  // A failure is only a genuine nonexistence certificate when the range
  // condition itself is violated somewhere.
  const auto fail = [&](int k, FailingCondition why, double residual,
                        double tol) -> NonexistenceReport {
    if (check_open_loop_existence(moments, t, options.range_tol).overall) {
      throw InternalInconsistencyError(fmt::format(
          "feedback recursion failed ({} at stage {}, residual {:.3e}) although "
          "E O_k lies in Ran(Cov(O_k)) at every stage",
          to_string(why), k, residual));
    }
    return NonexistenceReport{k, why, residual, tol};
  };

  for (int k = n - 1; k >= t; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const double s = spec.riskless[uk];
    const Eigen::VectorXd& e = moments.mean_excess[uk];
    const Eigen::MatrixXd& cov = moments.cov_excess[uk];
    const double big_s = tr.s_tilde[uk + 1];
    const double cal_s = tr.scal_tilde[uk + 1];
    const double u_next = tr.u_tilde[uk + 1];
    const double pi_next = tr.pi_tilde[uk + 1];

    // S~_{k+1} = 0 forces U~_{k+1} = pi~_{k+1} = 0.
    assert(big_s != 0.0 || (std::abs(u_next) < 1e-9 && std::abs(pi_next) < 1e-9));

    Eigen::MatrixXd o = cal_s * (e * e.transpose()) + big_s * cov;
    tr.o_tilde[uk] = o;
    tr.l_tilde[uk] = (s * cal_s + u_next) * e;
    tr.theta_tilde[uk] = pi_next * e;

    if (!numerics::is_psd(o, options.psd_tol)) {
      const double lmin = numerics::symmetric_eigenvalues(o).minCoeff();
      return fail(k, FailingCondition::PSDCondition, -lmin, options.psd_tol);
    }
    const Eigen::MatrixXd o_pinv = numerics::pseudoinverse(o, options.pinv_tol).pinv;
    tr.residual_l[uk] = relative_range_residual(o, o_pinv, tr.l_tilde[uk]);
    tr.residual_theta[uk] = relative_range_residual(o, o_pinv, tr.theta_tilde[uk]);
    if (tr.residual_l[uk] > options.range_tol) {
      return fail(k, FailingCondition::SolvabilityL, tr.residual_l[uk],
                  options.range_tol);
    }
    if (tr.residual_theta[uk] > options.range_tol) {
      return fail(k, FailingCondition::SolvabilityTheta, tr.residual_theta[uk],
                  options.range_tol);
    }
    tr.solvable[uk] = true;

    const Eigen::VectorXd phi = -o_pinv * tr.l_tilde[uk];
    const Eigen::VectorXd v = -o_pinv * tr.theta_tilde[uk];
    gains[uk - static_cast<std::size_t>(t)] = phi;
    offsets[uk - static_cast<std::size_t>(t)] = v;

    const double a = s + e.dot(phi);
    const double q = phi.dot(cov * phi);
    tr.closed_loop[uk] = a;

    tr.s_tilde[uk] = big_s * (a * a + q);
    tr.scal_tilde[uk] = cal_s * a * a + big_s * q;
    tr.u_tilde[uk] = a * u_next;
    // beta~_k = s S~cal_{k+1} E O^T - L~^T O~^dagger O~_k
    tr.beta_tilde[uk] = s * cal_s * e.transpose() + phi.transpose() * o;
    tr.pi_tilde[uk] = tr.beta_tilde[uk].dot(v) + a * pi_next;
  }

  return FeedbackSolution{
      AffinePolicy(PolicyKind::Feedback, t, std::move(gains), std::move(offsets)),
      std::move(tr)};
}

double feedback_stage_closed_loop(const FeedbackTrace& trace, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= trace.solvable.size() ||
      !trace.solvable[static_cast<std::size_t>(k)]) {
    throw std::out_of_range(fmt::format("stage {} was not solved", k));
  }
  return trace.closed_loop[static_cast<std::size_t>(k)];
}

}  // namespace mveq
