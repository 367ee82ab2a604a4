#include "mveq/policy.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace mveq {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::OpenLoop:
      return "open_loop";
    case PolicyKind::Feedback:
      return "feedback";
    case PolicyKind::MixedApplied:
      return "mixed_applied";
  }
  return "unknown";
}

std::string_view to_string(FailingCondition condition) {
  switch (condition) {
    case FailingCondition::RangeCondition:
      return "RangeCondition";
    case FailingCondition::PSDCondition:
      return "PSDCondition";
    case FailingCondition::SolvabilityL:
      return "SolvabilityL";
    case FailingCondition::SolvabilityTheta:
      return "SolvabilityTheta";
  }
  return "Unknown";
}

std::string NonexistenceReport::describe() const {
  return fmt::format("{} fails at stage {} (residual {:.6e}, tolerance {:.1e})",
                     to_string(failing_condition), failing_stage, residual,
                     tolerance);
}

AffinePolicy::AffinePolicy(PolicyKind kind, int start_stage,
                           std::vector<Eigen::VectorXd> gains,
                           std::vector<Eigen::VectorXd> offsets,
                           std::vector<Eigen::VectorXd> feedback_part)
    : kind_(kind),
      start_stage_(start_stage),
      gains_(std::move(gains)),
      offsets_(std::move(offsets)),
      feedback_part_(std::move(feedback_part)) {
  if (start_stage_ < 0) throw std::invalid_argument("start stage must be >= 0");
  if (gains_.size() != offsets_.size()) {
    throw std::invalid_argument("policy gains and offsets differ in length");
  }
  if (!feedback_part_.empty() && feedback_part_.size() != gains_.size()) {
    throw std::invalid_argument("pure-feedback part has the wrong length");
  }
  for (std::size_t i = 0; i < gains_.size(); ++i) {
    if (gains_[i].size() != gains_.front().size() ||
        offsets_[i].size() != gains_.front().size()) {
      throw std::invalid_argument("policy vectors differ in dimension");
    }
    if (!gains_[i].allFinite() || !offsets_[i].allFinite()) {
      throw std::invalid_argument(
          fmt::format("policy has non-finite entries at stage {}",
                      start_stage_ + static_cast<int>(i)));
    }
  }
}

std::size_t AffinePolicy::index(int k) const {
  if (k < start_stage_ || k >= end_stage()) {
    throw std::out_of_range(fmt::format("stage {} outside policy range [{}, {})",
                                        k, start_stage_, end_stage()));
  }
  return static_cast<std::size_t>(k - start_stage_);
}

const Eigen::VectorXd& AffinePolicy::gain(int k) const { return gains_[index(k)]; }

const Eigen::VectorXd& AffinePolicy::offset(int k) const {
  return offsets_[index(k)];
}

Eigen::VectorXd AffinePolicy::feedback_gain(int k) const {
  const std::size_t i = index(k);
  if (feedback_part_.empty()) return Eigen::VectorXd::Zero(gains_[i].size());
  return feedback_part_[i];
}

Eigen::VectorXd AffinePolicy::action(int k, double wealth) const {
  const std::size_t i = index(k);
  return gains_[i] * wealth + offsets_[i];
}

double riskless_growth(const MarketSpec& spec, int from) {
  double p = 1.0;
  for (int j = std::max(from, 0); j < spec.horizon; ++j) {
    p *= spec.riskless[static_cast<std::size_t>(j)];
  }
  return p;
}

MeanWealthCoefficients mean_wealth_coefficients(const AffinePolicy& policy,
                                                const ExcessMoments& moments,
                                                const MarketSpec& spec) {
  MeanWealthCoefficients out;
  out.start_stage = policy.start_stage();
  for (int k = policy.start_stage(); k < policy.end_stage(); ++k) {
    const auto& e = moments.mean_excess[static_cast<std::size_t>(k)];
    out.a.push_back(spec.riskless[static_cast<std::size_t>(k)] +
                    e.dot(policy.gain(k)));
    out.b.push_back(e.dot(policy.offset(k)));
  }
  return out;
}

std::vector<double> mean_wealth_path(const AffinePolicy& policy,
                                     const ExcessMoments& moments,
                                     const MarketSpec& spec, double x) {
  const auto coeffs = mean_wealth_coefficients(policy, moments, spec);
  std::vector<double> path{x};
  for (std::size_t i = 0; i < coeffs.a.size(); ++i) {
    path.push_back(coeffs.a[i] * path.back() + coeffs.b[i]);
  }
  return path;
}

}  // namespace mveq
