#include "mveq/equilibrium_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "mveq/numerics.hpp"

namespace mveq {

namespace {

constexpr double kHessianTol = 1e-8;
constexpr double kGradientRangeTol = 1e-8;
// Relative roundoff floor of a second difference of J.
constexpr double kDifferenceNoise = 1e-12;

struct WeightedMoments {
  double weight = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  // West's weighted update; avoids E X^2 - (E X)^2 cancellation.
  void add(double p, double value) {
    weight += p;
    const double delta = value - mean;
    mean += (p / weight) * delta;
    m2 += p * delta * (value - mean);
  }
};

class PathEnumerator {
 public:
  PathEnumerator(const ScenarioTree& tree, const MarketSpec& spec,
                 const AffinePolicy& policy, DeviationSemantics semantics)
      : tree_(tree), spec_(spec), policy_(policy), semantics_(semantics) {}

  void run(int k, double x, const Eigen::VectorXd& u_k,
           const Eigen::VectorXd& u_star) {
    const double s = spec_.riskless[static_cast<std::size_t>(k)];
    for (const auto& atom : tree_.atoms(k)) {
      descend(k + 1, s * x + atom.excess.dot(u_k), s * x + atom.excess.dot(u_star),
              atom.probability);
    }
  }

  const WeightedMoments& moments() const { return acc_; }

 private:
  Eigen::VectorXd control(int l, double x_dev, double x_star) const {
    switch (semantics_) {
      case DeviationSemantics::OpenLoop:
        return policy_.action(l, x_star);
      case DeviationSemantics::Feedback:
        return policy_.action(l, x_dev);
      case DeviationSemantics::Mixed: {
        const Eigen::VectorXd phi = policy_.feedback_gain(l);
        return phi * x_dev + (policy_.gain(l) - phi) * x_star + policy_.offset(l);
      }
    }
    throw std::logic_error("unknown deviation semantics");
  }

  void descend(int l, double x_dev, double x_star, double prob) {
    if (l == spec_.horizon) {
      acc_.add(prob, x_dev);
      return;
    }
    const double s = spec_.riskless[static_cast<std::size_t>(l)];
    const Eigen::VectorXd u = control(l, x_dev, x_star);
    const Eigen::VectorXd u_star = policy_.action(l, x_star);
    for (const auto& atom : tree_.atoms(l)) {
      descend(l + 1, s * x_dev + atom.excess.dot(u),
              s * x_star + atom.excess.dot(u_star), prob * atom.probability);
    }
  }

  const ScenarioTree& tree_;
  const MarketSpec& spec_;
  const AffinePolicy& policy_;
  DeviationSemantics semantics_;
  WeightedMoments acc_;
};

void check_inputs(const ScenarioTree& tree, const MarketSpec& spec,
                  const AffinePolicy& policy, int k) {
  if (tree.horizon() != spec.horizon || tree.num_assets() != spec.num_assets) {
    throw std::invalid_argument(fmt::format(
        "tree is {} stages x {} assets, market is {} x {}", tree.horizon(),
        tree.num_assets(), spec.horizon, spec.num_assets));
  }
  if (policy.end_stage() != spec.horizon) {
    throw std::invalid_argument("policy does not run to the market horizon");
  }
  if (k < policy.start_stage() || k >= spec.horizon) {
    throw std::out_of_range(fmt::format("stage {} outside [{}, {})", k,
                                        policy.start_stage(), spec.horizon));
  }
  if (tree.leaf_count(k) > kMaxLeafPaths) {
    throw PathCountError(fmt::format(
        "{} leaf paths from stage {} exceed the limit of {}; use Monte Carlo",
        tree.leaf_count(k), k, kMaxLeafPaths));
  }
}

}  // namespace

std::string_view to_string(DeviationSemantics semantics) {
  switch (semantics) {
    case DeviationSemantics::OpenLoop: return "open-loop";
    case DeviationSemantics::Feedback: return "feedback";
    case DeviationSemantics::Mixed: return "mixed";
  }
  return "unknown";
}

DeviationSemantics native_semantics(const AffinePolicy& policy) {
  switch (policy.kind()) {
    case PolicyKind::OpenLoop: return DeviationSemantics::OpenLoop;
    case PolicyKind::Feedback: return DeviationSemantics::Feedback;
    case PolicyKind::MixedApplied: return DeviationSemantics::Mixed;
  }
  return DeviationSemantics::OpenLoop;
}

CostBreakdown evaluate_cost_breakdown(const ScenarioTree& tree,
                                      const MarketSpec& spec,
                                      const AffinePolicy& policy, int k, double x,
                                      DeviationSemantics semantics,
                                      const std::optional<Eigen::VectorXd>& spike) {
  check_inputs(tree, spec, policy, k);
  const Eigen::VectorXd u_star = policy.action(k, x);
  if (spike && spike->size() != u_star.size()) {
    throw std::invalid_argument("spike has the wrong dimension");
  }
  PathEnumerator walker(tree, spec, policy, semantics);
  walker.run(k, x, spike ? *spike : u_star, u_star);
  const auto& acc = walker.moments();
  CostBreakdown out;
  out.mean = acc.mean;
  out.variance = acc.m2 / acc.weight;
  out.cost = out.variance - (spec.mu1 * x + spec.mu2) * out.mean;
  return out;
}

double evaluate_cost_exact(const ScenarioTree& tree, const MarketSpec& spec,
                           const AffinePolicy& policy, int k, double x,
                           DeviationSemantics semantics) {
  return evaluate_cost_breakdown(tree, spec, policy, k, x, semantics).cost;
}

double evaluate_spiked_cost(const ScenarioTree& tree, const MarketSpec& spec,
                            const AffinePolicy& policy, int k, double x,
                            DeviationSemantics semantics,
                            const Eigen::VectorXd& spike) {
  return evaluate_cost_breakdown(tree, spec, policy, k, x, semantics, spike).cost;
}

SpikeDeviation best_spike_deviation(const ScenarioTree& tree,
                                    const MarketSpec& spec,
                                    const AffinePolicy& policy, int k, double x,
                                    DeviationSemantics semantics) {
  const int m = spec.num_assets;
  SpikeDeviation out;
  out.action = policy.action(k, x);

  const auto f = [&](const Eigen::VectorXd& step) {
    return evaluate_spiked_cost(tree, spec, policy, k, x, semantics,
                                out.action + step);
  };
  const auto unit = [m](int i) { return Eigen::VectorXd::Unit(m, i); };

  const double f0 = f(Eigen::VectorXd::Zero(m));
  Eigen::VectorXd f1(m), f2(m);
  for (int i = 0; i < m; ++i) {
    f1[i] = f(unit(i));
    f2[i] = f(2.0 * unit(i));
  }
  Eigen::MatrixXd h(m, m);
  for (int i = 0; i < m; ++i) {
    h(i, i) = f2[i] - 2.0 * f1[i] + f0;
    for (int j = 0; j < i; ++j) {
      h(i, j) = h(j, i) = f(unit(i) + unit(j)) - f1[i] - f1[j] + f0;
    }
  }
  Eigen::VectorXd g = f1 - Eigen::VectorXd::Constant(m, f0) - 0.5 * h.diagonal();

  out.j_star = f0;
  out.hessian = h;
  out.gradient = g;

  if (m == 0) {
    out.u_dev = out.action;
    out.j_dev = out.j_model = f0;
    return out;
  }
  // Eigenvalues at roundoff level are exact zeros of the true quadratic.
  const double f_max = std::max({std::abs(f0), f1.cwiseAbs().maxCoeff(),
                                 f2.cwiseAbs().maxCoeff()});
  const double noise = kDifferenceNoise * std::max(1.0, f_max);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  Eigen::VectorXd eig = es.eigenvalues();
  for (double& l : eig) {
    if (std::abs(l) <= noise) l = 0.0;
  }
  h = es.eigenvectors() * eig.asDiagonal() * es.eigenvectors().transpose();
  out.hessian = h;
  const double scale = std::max(1.0, eig.cwiseAbs().maxCoeff());
  if (eig.minCoeff() < -kHessianTol * scale) {
    throw NonConvexDeviationError(fmt::format(
        "spike cost at stage {} (x = {}) is not convex: lambda_min(H) = {:.3e}",
        k, x, eig.minCoeff()));
  }

  const auto range = numerics::range_membership(g, h, kGradientRangeTol);
  if (!range.member) {
    // Convex but unbounded below along a null direction of H.
    out.u_dev = out.action;
    out.j_dev = out.j_model = -std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::VectorXd d = -numerics::pseudoinverse(h).pinv * g;
  out.u_dev = out.action + d;
  out.j_model = f0 + g.dot(d) + 0.5 * d.dot(h * d);
  out.j_dev = f(d);
  return out;
}

std::vector<DeviationReport> verify_equilibrium(const ScenarioTree& tree,
                                                const MarketSpec& spec,
                                                const AffinePolicy& policy,
                                                double x,
                                                DeviationSemantics semantics,
                                                const VerifyOptions& options) {
  const int t = policy.start_stage();
  check_inputs(tree, spec, policy, t);

  struct Job {
    int stage;
    std::uint64_t node_id;
    double state;
  };
  std::vector<Job> jobs;
  std::vector<double> level{x};
  for (int k = t; k < spec.horizon; ++k) {
    for (std::size_t i = 0; i < level.size(); ++i) {
      jobs.push_back({k, static_cast<std::uint64_t>(i), level[i]});
    }
    if (k + 1 == spec.horizon) break;
    const double s = spec.riskless[static_cast<std::size_t>(k)];
    std::vector<double> next;
    next.reserve(level.size() * tree.atoms(k).size());
    for (const double xs : level) {
      const Eigen::VectorXd u = policy.action(k, xs);
      for (const auto& atom : tree.atoms(k)) next.push_back(s * xs + atom.excess.dot(u));
    }
    level = std::move(next);
  }

  std::vector<DeviationReport> reports(jobs.size());
  const auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < jobs.size(); i += stride) {
      const Job& job = jobs[i];
      const SpikeDeviation dev =
          best_spike_deviation(tree, spec, policy, job.stage, job.state, semantics);
      DeviationReport& r = reports[i];
      r.stage = job.stage;
      r.node_id = job.node_id;
      r.state = job.state;
      r.j_star = dev.j_star;
      r.j_dev = dev.j_dev;
      r.gap = dev.j_dev - dev.j_star;
      r.tolerance = options.rel_tol * std::max(1.0, std::abs(dev.j_star));
      r.passed = r.gap >= -r.tolerance;
      r.semantics = semantics;
      r.u_dev = dev.u_dev;
      r.action = dev.action;
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads,
                                      static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, threads);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return reports;
}

VerificationSummary summarize(const std::vector<DeviationReport>& reports) {
  VerificationSummary s;
  s.records = reports.size();
  s.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) {
    s.min_gap = std::min(s.min_gap, r.gap);
    if (!r.passed) ++s.failures;
  }
  if (reports.empty()) s.min_gap = 0.0;
  s.passed = s.failures == 0;
  return s;
}

namespace {

nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// JSON has no infinities.
nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void write_deviation_jsonl(std::ostream& out,
                           const std::vector<DeviationReport>& reports) {
  for (const auto& r : reports) {
    nlohmann::json j;
    j["stage"] = r.stage;
    j["node"] = r.node_id;
    j["state"] = r.state;
    j["j_star"] = r.j_star;
    j["j_dev"] = finite_or_null(r.j_dev);
    j["gap"] = finite_or_null(r.gap);
    j["tolerance"] = r.tolerance;
    j["passed"] = r.passed;
    j["semantics"] = to_string(r.semantics);
    j["u_dev"] = to_json_array(r.u_dev);
    j["action"] = to_json_array(r.action);
    out << j.dump() << '\n';
  }
  const VerificationSummary s = summarize(reports);
  nlohmann::json j;
  j["summary"] = true;
  j["records"] = s.records;
  j["failures"] = s.failures;
  j["min_gap"] = finite_or_null(s.min_gap);
  j["passed"] = s.passed;
  out << j.dump() << '\n';
}

}  // namespace mveq
