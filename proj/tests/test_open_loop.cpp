#include <cmath>

#include <gtest/gtest.h>

#include "mveq/equilibrium_oracle.hpp"
#include "mveq/open_loop_solver.hpp"
#include "support/expectations.hpp"
#include "support/random_market.hpp"

using namespace mveq;
using mveq::fixtures::kOpenLoopGain;
using mveq::fixtures::kPrintTol;

namespace {

OpenLoopSolution solve_ok(const MarketSpec& spec, const SolverOptions& opt = {}) {
  auto r = solve_open_loop(derive_excess_moments(spec), spec, opt);
  EXPECT_TRUE(r.ok()) << (r.ok() ? "" : r.failure().describe());
  return r.value();
}

MarketSpec degenerate_two_asset(int horizon, const Eigen::Vector2d& excess) {
  MarketSpec spec;
  spec.horizon = horizon;
  spec.num_assets = 2;
  for (int k = 0; k < horizon; ++k) {
    spec.riskless.push_back(1.03);
    spec.mean_returns.push_back(excess + Eigen::Vector2d::Constant(1.03));
    spec.return_cov.push_back(Eigen::Vector2d(1, 0).asDiagonal());
  }
  return validate_market_spec(spec);
}

}  // namespace

TEST(SolveOpenLoop, ExampleTable) {
  const OpenLoopSolution sol = solve_ok(fixtures::example_market());
  EXPECT_EQ(sol.policy.kind(), PolicyKind::OpenLoop);
  EXPECT_EQ(sol.policy.start_stage(), 0);
  for (int k = 0; k < 4; ++k) {
    fixtures::expect_vec_near(sol.policy.gain(k), kOpenLoopGain[k], kPrintTol,
                             "K_" + std::to_string(k));
    fixtures::expect_vec_near(sol.policy.offset(k), kOpenLoopGain[k], kPrintTol,
                             "c_" + std::to_string(k));
  }
}

TEST(SolveOpenLoop, ZeroExcessGivesZeroPolicy) {
  const MarketSpec spec = stationary_market(
      3, 1.05, Eigen::Vector3d::Constant(1.05), Eigen::Matrix3d::Identity() * 0.02, 1.0, 2.0);
  const OpenLoopSolution sol = solve_ok(spec);
  double growth = 1.0;
  for (int k = 2; k >= 0; --k) {
    growth *= 1.05 * 1.05;
    EXPECT_EQ(sol.policy.gain(k), Eigen::Vector3d::Zero());
    EXPECT_EQ(sol.policy.offset(k), Eigen::Vector3d::Zero());
    EXPECT_NEAR(sol.trace.st_sum[k], growth, 1e-14);
  }
  const MeanWealthCoefficients c =
      equilibrium_wealth_coefficients(sol, derive_excess_moments(spec), spec);
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(c.a[k], 1.05);
    EXPECT_DOUBLE_EQ(c.b[k], 0.0);
  }
}

TEST(SolveOpenLoop, RangeConditionFailure) {
  const MarketSpec spec = degenerate_two_asset(2, Eigen::Vector2d(0, 0.1));
  const auto r = solve_open_loop(derive_excess_moments(spec), spec);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure().failing_condition, FailingCondition::RangeCondition);
  EXPECT_EQ(r.failure().failing_stage, 1);
  EXPECT_NEAR(r.failure().residual, 0.1, 1e-12);
  EXPECT_GT(r.failure().residual, r.failure().tolerance);
}

TEST(SolveOpenLoop, WealthCoefficientsAtLastStage) {
  const MarketSpec spec = fixtures::example_market();
  const ExcessMoments mo = derive_excess_moments(spec);
  const OpenLoopSolution sol = solve_ok(spec);
  const MeanWealthCoefficients c = equilibrium_wealth_coefficients(sol, mo, spec);
  const Eigen::Vector3d printed(0.4739, 0.7689, 2.7381);
  // 4-decimal inputs leave about 5e-4 * sum|E O| of slack.
  EXPECT_NEAR(c.a[3], 1.04 + mo.mean_excess[3].dot(printed), 5e-4 * 0.516);
  EXPECT_NEAR(c.b[3], mo.mean_excess[3].dot(printed), 5e-4 * 0.516);
}

TEST(SolveOpenLoop, EqualTradeoffsGiveEqualGainAndOffset) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    MarketSpec spec = fixtures::random_market(seed, {5, 4, 0.3, true});
    spec.mu2 = spec.mu1;
    const OpenLoopSolution sol = solve_ok(spec);
    for (int k = spec.initial_time; k < spec.horizon; ++k) {
      EXPECT_LE((sol.policy.gain(k) - sol.policy.offset(k)).norm(), 1e-12);
    }
  }
}

TEST(SolveOpenLoop, TerminalClosedForm) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {5, 4, 0.3, false});
    const ExcessMoments mo = derive_excess_moments(spec);
    const OpenLoopSolution sol = solve_ok(spec);
    const int n = spec.horizon - 1;
    const Eigen::VectorXd base = numerics::pseudoinverse(mo.cov_excess[n]).pinv * mo.mean_excess[n];
    EXPECT_LE((sol.policy.gain(n) - 0.5 * spec.mu1 * base).norm(), 1e-12 * std::max(1.0, base.norm()));
    EXPECT_LE((sol.policy.offset(n) - 0.5 * spec.mu2 * base).norm(), 1e-12 * std::max(1.0, base.norm()));
  }
}

TEST(SolveOpenLoop, TraceInvariants) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {6, 4, 0.3, true});
    const ExcessMoments mo = derive_excess_moments(spec);
    const OpenLoopSolution sol = solve_ok(spec);
    const auto& tr = sol.trace;
    const int n = spec.horizon;
    EXPECT_EQ(tr.st_sum[n], 1.0);
    EXPECT_EQ(tr.s_hat[n], 1.0);
    EXPECT_EQ(tr.u_hat[n], -0.5 * spec.mu1);
    EXPECT_EQ(tr.pi_hat[n], -0.5 * spec.mu2);
    for (int k = spec.initial_time; k < n; ++k) {
      EXPECT_GT(tr.st_sum[k], 0.0);
      EXPECT_TRUE(tr.range_ok[k]);
      EXPECT_EQ(tr.o_hat[k], tr.st_sum[k + 1] * mo.cov_excess[k]);
      const double growth = riskless_growth(spec, k + 1);
      EXPECT_LE((tr.l_hat[k] + 0.5 * spec.mu1 * growth * mo.mean_excess[k]).norm(), 1e-13);
      EXPECT_LE((tr.theta_hat[k] - spec.mu2 / spec.mu1 * tr.l_hat[k]).norm(), 1e-13);
      EXPECT_NEAR(tr.s_hat[k], spec.riskless[k] * spec.riskless[k] * tr.s_hat[k + 1], 1e-13);
    }
  }
}

TEST(SolveOpenLoop, UniqueUnderCutoffPerturbation) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {5, 4, 0.0, true});
    const OpenLoopSolution ref = solve_ok(spec);
    for (const double cutoff : {1e-8, 1e-9, 1e-11, 1e-12}) {
      SolverOptions opt;
      opt.pinv_tol = cutoff;
      const OpenLoopSolution other = solve_ok(spec, opt);
      for (int k = spec.initial_time; k < spec.horizon; ++k) {
        EXPECT_LE((other.policy.gain(k) - ref.policy.gain(k)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((other.policy.offset(k) - ref.policy.offset(k)).cwiseAbs().maxCoeff(), 1e-9);
      }
    }
  }
}

TEST(SolveOpenLoop, DegenerateCovarianceInRange) {
  const Eigen::Vector2d q(0.3, 0.1);
  MarketSpec spec = stationary_market(3, 1.02, Eigen::Vector2d::Constant(1.02) + 0.4 * q,
                                      q * q.transpose(), 1.0, 1.0);
  const OpenLoopSolution sol = solve_ok(spec);
  for (int k = 0; k < 3; ++k) {
    // The control lies in Ran(Cov) = span(q).
    const Eigen::Vector2d perp(-q[1], q[0]);
    EXPECT_NEAR(sol.policy.gain(k).dot(perp), 0.0, 1e-12);
  }
}

TEST(SolveOpenLoop, PassesSpikeDeviationOracle) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {3, 2, 0.3, true});
    const ExcessMoments mo = derive_excess_moments(spec);
    const OpenLoopSolution sol = solve_ok(spec);
    const ScenarioTree tree = build_matched_tree(mo, 2 * spec.num_assets + 1, seed);
    const auto reports = verify_equilibrium(tree, spec, sol.policy, spec.initial_wealth,
                                            DeviationSemantics::OpenLoop);
    const auto summary = summarize(reports);
    EXPECT_TRUE(summary.passed) << "seed " << seed << " min gap " << summary.min_gap;
  }
}
