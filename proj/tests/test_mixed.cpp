#include <cmath>
#include <iostream>

#include <gtest/gtest.h>

#include "mveq/equilibrium_oracle.hpp"
#include "mveq/feedback_solver.hpp"
#include "mveq/mixed_solver.hpp"
#include "mveq/open_loop_solver.hpp"
#include "support/expectations.hpp"
#include "support/random_market.hpp"

using namespace mveq;
using mveq::fixtures::kPrintTol;

namespace {

MixedSolution solve_ok(const MarketSpec& spec, const PureFeedbackPart& phi,
                       const SolverOptions& opt = {}) {
  auto r = solve_mixed(derive_excess_moments(spec), spec, phi, opt);
  EXPECT_TRUE(r.ok()) << (r.ok() ? "" : r.failure().describe());
  return r.value();
}

}  // namespace

TEST(SolveMixed, ExampleTableWithPrintedPhi) {
  const MixedSolution sol = solve_ok(fixtures::example_market(), example_pure_feedback());
  EXPECT_EQ(sol.applied.kind(), PolicyKind::MixedApplied);
  EXPECT_TRUE(sol.applied.has_feedback_part());
  for (int k = 0; k < 4; ++k) {
    fixtures::expect_vec_near(sol.applied.gain(k), fixtures::kMixedGain[k], kPrintTol,
                             "K_" + std::to_string(k));
    fixtures::expect_vec_near(sol.applied.offset(k), fixtures::kMixedOffset[k], kPrintTol,
                             "c_" + std::to_string(k));
  }
  fixtures::expect_vec_near(sol.trace.o_eigs[3], fixtures::kMixedO3Eigenvalues, kPrintTol,
                           "eig O_3");
}

TEST(SolveMixed, OpenLoopPartDecomposition) {
  const PureFeedbackPart phi = example_pure_feedback();
  const MixedSolution sol = solve_ok(fixtures::example_market(), phi);
  for (int k = 0; k < 4; ++k) {
    EXPECT_LE((sol.open_loop_gain[k] + phi.phi[k] - sol.applied.gain(k)).norm(), 1e-15);
    EXPECT_EQ(sol.open_loop_offset[k], sol.applied.offset(k));
    EXPECT_EQ(sol.applied.feedback_gain(k), phi.phi[k]);
  }
}

TEST(SolveMixed, ZeroPhiReducesToOpenLoop) {
  const auto check = [](const MarketSpec& spec) {
    const ExcessMoments mo = derive_excess_moments(spec);
    const MixedSolution mx =
        solve_ok(spec, PureFeedbackPart::zero(spec.horizon, spec.num_assets));
    const auto ol = solve_open_loop(mo, spec);
    ASSERT_TRUE(ol.ok());
    for (int k = spec.initial_time; k < spec.horizon; ++k) {
      EXPECT_LE((mx.applied.gain(k) - ol->policy.gain(k)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((mx.applied.offset(k) - ol->policy.offset(k)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_NEAR(mx.trace.tcal[k], 0.0, 1e-12);
      EXPECT_LE(mx.trace.beta[k].norm(), 1e-12);
    }
    const auto a = mixed_equilibrium_wealth_mean(mx, mo, spec);
    const auto b = mean_wealth_path(ol->policy, mo, spec, spec.initial_wealth);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
  };
  check(fixtures::example_market());
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    check(fixtures::random_market(seed, {5, 4, 0.3, true}));
  }
}

TEST(SolveMixed, LastStageIndependentOfPhi) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {5, 3, 0.3, false});
    const ExcessMoments mo = derive_excess_moments(spec);
    const auto ol = solve_open_loop(mo, spec);
    const auto fb = solve_feedback(mo, spec);
    const MixedSolution mx =
        solve_ok(spec, sample_pure_feedback(seed, spec.horizon, spec.num_assets));
    const int n = spec.horizon - 1;
    EXPECT_LE((mx.applied.gain(n) - ol->policy.gain(n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mx.applied.offset(n) - fb->policy.offset(n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mx.trace.o_mix[n] - mo.cov_excess[n]).norm(), 1e-15);
  }
}

TEST(SolveMixed, DirectTRecursionAgrees) {
  SolverOptions opt;
  opt.cross_check_direct_t = true;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {5, 4, 0.3, true});
    const auto phi = sample_pure_feedback(seed * 7, spec.horizon, spec.num_assets);
    EXPECT_NO_THROW(solve_mixed(derive_excess_moments(spec), spec, phi, opt)) << seed;
  }
  EXPECT_NO_THROW(solve_mixed(derive_excess_moments(fixtures::example_market()),
                              fixtures::example_market(), example_pure_feedback(), opt));
}

TEST(SolveMixed, NonnegativeSLevel) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {5, 4, 0.3, true});
    const MixedSolution mx =
        solve_ok(spec, sample_pure_feedback(seed, spec.horizon, spec.num_assets));
    for (int k = spec.initial_time; k <= spec.horizon; ++k) {
      EXPECT_GE(mx.trace.s[k], 0.0);
      EXPECT_GE(mx.trace.scal[k], 0.0);
    }
    for (int k = spec.initial_time; k < spec.horizon; ++k) {
      EXPECT_TRUE(mx.trace.s_level_psd[k]);
    }
  }
}

TEST(SolveMixed, ExampleSampledDrawsEigenvalueSurvey) {
  // Indefinite O_k are counted and printed, not asserted.
  const MarketSpec spec = fixtures::example_market();
  const ExcessMoments mo = derive_excess_moments(spec);
  int indefinite = 0, kept = 0;
  for (std::uint64_t seed = 1; kept < 100; ++seed) {
    const PureFeedbackPart phi = sample_pure_feedback(seed, 4, 3);
    bool in_box = true;
    for (const auto& p : phi.phi) in_box = in_box && p.cwiseAbs().maxCoeff() <= 3.0;
    if (!in_box) continue;
    ++kept;
    const auto r = solve_mixed(mo, spec, phi);
    ASSERT_TRUE(r.ok()) << "seed " << seed;
    for (int k = 0; k < 4; ++k) {
      const double lmin = r->trace.o_eigs[k].minCoeff();
      if (lmin <= 0.0) {
        ++indefinite;
        std::cout << "[ survey ] seed " << seed << ": lambda_min(O_" << k << ") = " << lmin
                  << '\n';
        break;
      }
    }
  }
  std::cout << "[ survey ] " << indefinite << " of " << kept
            << " draws have a non-positive eigenvalue in some O_k\n";
  RecordProperty("indefinite_draws", indefinite);
}

TEST(SolveMixed, PrintedSecondDrawHasIndefiniteO0) {
  const MarketSpec spec = fixtures::example_market();
  const PureFeedbackPart phi = PureFeedbackPart::user({
      Eigen::Vector3d(-0.5336, -2.0026, 0.9642), Eigen::Vector3d(-0.8314, -0.9792, -1.1564),
      Eigen::Vector3d(-0.2620, -1.7502, -0.2857), Eigen::Vector3d(0.3502, -0.2991, 0.0229)});
  const MixedSolution mx = solve_ok(spec, phi);
  EXPECT_NEAR(mx.trace.o_eigs[0][0], -0.0004, kPrintTol);
  EXPECT_LT(mx.trace.o_eigs[0][0], 0.0);
}

TEST(SamplePureFeedback, Deterministic) {
  const auto a = sample_pure_feedback(42, 4, 3);
  const auto b = sample_pure_feedback(42, 4, 3);
  ASSERT_EQ(a.phi.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.phi[k].size(), 3);
    EXPECT_TRUE(a.phi[k].allFinite());
    EXPECT_EQ(a.phi[k], b.phi[k]);
  }
  EXPECT_EQ(a.provenance, PhiProvenance::Sampled);
  EXPECT_EQ(a.seed, 42u);
  const auto c = sample_pure_feedback(1, 4, 3);
  const auto d = sample_pure_feedback(2, 4, 3);
  EXPECT_NE(c.phi[0], d.phi[0]);
}

TEST(SolveMixed, RejectsMalformedPhi) {
  const MarketSpec spec = fixtures::example_market();
  const ExcessMoments mo = derive_excess_moments(spec);
  EXPECT_THROW(solve_mixed(mo, spec, PureFeedbackPart::zero(3, 3)), std::invalid_argument);
  EXPECT_THROW(solve_mixed(mo, spec, PureFeedbackPart::zero(4, 2)), std::invalid_argument);
}

TEST(ParsePureFeedback, ReadsArray) {
  const auto p = parse_pure_feedback("[[1, 2], [3, 4.5]]");
  ASSERT_EQ(p.phi.size(), 2u);
  EXPECT_EQ(p.phi[1], Eigen::Vector2d(3, 4.5));
  EXPECT_EQ(p.provenance, PhiProvenance::UserSupplied);
  EXPECT_THROW(parse_pure_feedback("[1, 2]"), ParseError);
  EXPECT_THROW(parse_pure_feedback("[[1, \"x\"]]"), ParseError);
  EXPECT_THROW(parse_pure_feedback("[[1"), ParseError);
}

TEST(MixedWealthMean, ZeroExcess) {
  const MarketSpec spec = stationary_market(3, 1.05, Eigen::Vector2d::Constant(1.05),
                                            Eigen::Matrix2d::Identity() * 0.02, 1, 1, 0, 2.0);
  const MixedSolution mx = solve_ok(spec, sample_pure_feedback(3, 3, 2));
  const auto mean = mixed_equilibrium_wealth_mean(mx, derive_excess_moments(spec), spec);
  ASSERT_EQ(mean.size(), 4u);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(mean[k], 2.0 * std::pow(1.05, k), 1e-13);
}

TEST(MixedWealthMean, ExampleFollowsAppliedRecursion) {
  const MarketSpec spec = fixtures::example_market();
  const ExcessMoments mo = derive_excess_moments(spec);
  const MixedSolution mx = solve_ok(spec, example_pure_feedback());
  const auto mean = mixed_equilibrium_wealth_mean(mx, mo, spec);
  double x = 1.0;
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector3d gain(fixtures::kMixedGain[k].data());
    const Eigen::Vector3d offset(fixtures::kMixedOffset[k].data());
    x = (1.04 + mo.mean_excess[k].dot(gain)) * x + mo.mean_excess[k].dot(offset);
    EXPECT_NEAR(mean[k + 1], x, 5e-3 * std::max(1.0, x)) << k;
  }
}

TEST(SolveMixed, PassesSpikeDeviationOracle) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const MarketSpec spec = fixtures::random_market(seed, {3, 2, 0.3, true});
    const ExcessMoments mo = derive_excess_moments(spec);
    const MixedSolution mx =
        solve_ok(spec, sample_pure_feedback(seed, spec.horizon, spec.num_assets));
    const ScenarioTree tree = build_matched_tree(mo, 2 * spec.num_assets + 1, seed);
    const auto summary = summarize(verify_equilibrium(
        tree, spec, mx.applied, spec.initial_wealth, DeviationSemantics::Mixed));
    EXPECT_TRUE(summary.passed) << "seed " << seed << " min gap " << summary.min_gap;
  }
}
