#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mveq/market_model.hpp"
#include "mveq/numerics.hpp"

namespace mveq {

enum class PolicyKind { OpenLoop, Feedback, MixedApplied };

std::string_view to_string(PolicyKind kind);

/// u_k = K_k X_k + c_k for k = start_stage, ..., N-1.
///
/// For a mixed solution the applied policy additionally carries its
/// pure-feedback part Phi; along the equilibrium path Phi_k X + v_k collapses
/// to K_k X + c_k, but a deviated state is fed back only through Phi.
class AffinePolicy {
 public:
  AffinePolicy() = default;
  AffinePolicy(PolicyKind kind, int start_stage,
               std::vector<Eigen::VectorXd> gains,
               std::vector<Eigen::VectorXd> offsets,
               std::vector<Eigen::VectorXd> feedback_part = {});

  PolicyKind kind() const { return kind_; }
  int start_stage() const { return start_stage_; }
  /// One past the last stage (N).
  int end_stage() const { return start_stage_ + static_cast<int>(gains_.size()); }
  int num_assets() const {
    return gains_.empty() ? 0 : static_cast<int>(gains_.front().size());
  }

  const Eigen::VectorXd& gain(int k) const;
  const Eigen::VectorXd& offset(int k) const;
  /// Phi_k, or zero when the policy has no pure-feedback part.
  Eigen::VectorXd feedback_gain(int k) const;
  bool has_feedback_part() const { return !feedback_part_.empty(); }

  Eigen::VectorXd action(int k, double wealth) const;

  const std::vector<Eigen::VectorXd>& gains() const { return gains_; }
  const std::vector<Eigen::VectorXd>& offsets() const { return offsets_; }

 private:
  std::size_t index(int k) const;

  PolicyKind kind_ = PolicyKind::OpenLoop;
  int start_stage_ = 0;
  std::vector<Eigen::VectorXd> gains_;
  std::vector<Eigen::VectorXd> offsets_;
  std::vector<Eigen::VectorXd> feedback_part_;
};

enum class FailingCondition {
  RangeCondition,
  PSDCondition,
  SolvabilityL,
  SolvabilityTheta
};

std::string_view to_string(FailingCondition condition);

/// A certified "no solution" answer: the recursion's solvability condition
/// fails at `failing_stage` with the reported residual.
struct NonexistenceReport {
  int failing_stage = 0;
  FailingCondition failing_condition = FailingCondition::RangeCondition;
  double residual = 0.0;
  double tolerance = 0.0;

  std::string describe() const;
};

/// A recursion that the theory guarantees to be solvable failed anyway.
class InternalInconsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename Solution>
class SolveResult {
 public:
  SolveResult(Solution solution) : state_(std::move(solution)) {}
  SolveResult(NonexistenceReport report) : state_(std::move(report)) {}

  bool ok() const { return std::holds_alternative<Solution>(state_); }
  explicit operator bool() const { return ok(); }

  const Solution& value() const {
    if (!ok()) {
      throw std::logic_error("no solution: " + failure().describe());
    }
    return std::get<Solution>(state_);
  }
  const Solution* operator->() const { return &value(); }

  const NonexistenceReport& failure() const {
    if (ok()) throw std::logic_error("solve succeeded; no failure report");
    return std::get<NonexistenceReport>(state_);
  }

 private:
  std::variant<Solution, NonexistenceReport> state_;
};

struct SolverOptions {
  double range_tol = numerics::kDefaultRangeTol;
  double psd_tol = numerics::kDefaultPsdTol;
  double pinv_tol = numerics::kDefaultPinvTol;
  double dagger_tol = numerics::kDefaultDaggerTol;
  /// Mixed solver: also run the direct T / calligraphic-T recursions and
  /// require agreement with the combined form.
  bool cross_check_direct_t = false;
};

/// E X*_{k+1} = a_k E X*_k + b_k along the equilibrium path.
struct MeanWealthCoefficients {
  int start_stage = 0;
  std::vector<double> a;
  std::vector<double> b;
};

MeanWealthCoefficients mean_wealth_coefficients(const AffinePolicy& policy,
                                                const ExcessMoments& moments,
                                                const MarketSpec& spec);

/// E X*_t = x, ..., E X*_N (N - t + 1 values).
std::vector<double> mean_wealth_path(const AffinePolicy& policy,
                                     const ExcessMoments& moments,
                                     const MarketSpec& spec, double x);

/// prod_{j=from}^{N-1} s_j (1 for from >= N).
double riskless_growth(const MarketSpec& spec, int from);

}  // namespace mveq
