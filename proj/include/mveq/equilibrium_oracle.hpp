#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"
#include "mveq/policy.hpp"
#include "mveq/scenario_tree.hpp"

namespace mveq {

/// How the controls after a one-stage spike at stage k are produced.
///   OpenLoop: u_l = K_l X*_l + c_l, replayed from the undeviated path.
///   Feedback: u_l = K_l X_l + c_l on the deviated state.
///   Mixed:    u_l = Phi_l X_l + (K_l - Phi_l) X*_l + c_l.
enum class DeviationSemantics { OpenLoop, Feedback, Mixed };

std::string_view to_string(DeviationSemantics semantics);
/// Semantics a solver's policy is defined under.
DeviationSemantics native_semantics(const AffinePolicy& policy);

inline constexpr std::uint64_t kMaxLeafPaths = 10'000'000;
inline constexpr double kDefaultVerifyRelTol = 1e-7;

class PathCountError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// H has an eigenvalue below -tol: the spike cost has no minimiser.
class NonConvexDeviationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CostBreakdown {
  double mean = 0.0;      ///< E_k X_N
  double variance = 0.0;  ///< E_k (X_N - E_k X_N)^2
  double cost = 0.0;      ///< variance - (mu1 x + mu2) mean
};

/// Exact conditional cost at (k, x) by enumerating every path of the tree
/// from stage k. `spike`, when given, replaces the stage-k control.
CostBreakdown evaluate_cost_breakdown(
    const ScenarioTree& tree, const MarketSpec& spec, const AffinePolicy& policy,
    int k, double x, DeviationSemantics semantics,
    const std::optional<Eigen::VectorXd>& spike = std::nullopt);

double evaluate_cost_exact(const ScenarioTree& tree, const MarketSpec& spec,
                           const AffinePolicy& policy, int k, double x,
                           DeviationSemantics semantics);

double evaluate_spiked_cost(const ScenarioTree& tree, const MarketSpec& spec,
                            const AffinePolicy& policy, int k, double x,
                            DeviationSemantics semantics,
                            const Eigen::VectorXd& spike);

struct SpikeDeviation {
  Eigen::VectorXd action;  ///< the policy's own control at (k, x)
  Eigen::VectorXd u_dev;   ///< minimiser of the spiked cost
  double j_star = 0.0;     ///< cost at the policy's action
  double j_dev = 0.0;      ///< cost at u_dev; -inf when unbounded below
  double j_model = 0.0;    ///< quadratic model's prediction at u_dev
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;  ///< at the policy's action
};

/// Fits the exact quadratic J(u) from 1 + m + m(m+1)/2 evaluations around the
/// policy's action and minimises it with -H^dagger g.
SpikeDeviation best_spike_deviation(const ScenarioTree& tree,
                                    const MarketSpec& spec,
                                    const AffinePolicy& policy, int k, double x,
                                    DeviationSemantics semantics);

struct DeviationReport {
  int stage = 0;
  std::uint64_t node_id = 0;  ///< mixed-radix index of the atom history
  double state = 0.0;         ///< X*_k at the node
  double j_star = 0.0;
  double j_dev = 0.0;
  double gap = 0.0;  ///< j_dev - j_star
  double tolerance = 0.0;
  bool passed = false;  ///< gap >= -tolerance
  DeviationSemantics semantics = DeviationSemantics::OpenLoop;
  Eigen::VectorXd u_dev;
  Eigen::VectorXd action;
};

struct VerifyOptions {
  double rel_tol = kDefaultVerifyRelTol;  ///< tol = rel_tol * max(1, |J*|)
  unsigned threads = 1;
};

/// Every stage k >= policy.start_stage() and every node reachable from
/// (policy.start_stage(), x) along the policy's own path.
std::vector<DeviationReport> verify_equilibrium(const ScenarioTree& tree,
                                                const MarketSpec& spec,
                                                const AffinePolicy& policy,
                                                double x,
                                                DeviationSemantics semantics,
                                                const VerifyOptions& options = {});

struct VerificationSummary {
  std::size_t records = 0;
  std::size_t failures = 0;
  double min_gap = 0.0;
  bool passed = true;
};

VerificationSummary summarize(const std::vector<DeviationReport>& reports);

/// One JSON object per line for each report, then a summary line.
void write_deviation_jsonl(std::ostream& out,
                           const std::vector<DeviationReport>& reports);

}  // namespace mveq
