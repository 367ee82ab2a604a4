#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mveq/equilibrium_oracle.hpp"
#include "mveq/feedback_solver.hpp"
#include "mveq/market_model.hpp"
#include "mveq/mixed_solver.hpp"
#include "mveq/monte_carlo.hpp"
#include "mveq/open_loop_solver.hpp"
#include "mveq/trace_export.hpp"

namespace mveq::cli {

namespace {

using nlohmann::json;

constexpr double kReproduceTol = 5e-4;

struct CommandInfo {
  Command command;
  const char* name;
  const char* help;
};

constexpr CommandInfo kCommands[] = {
    {Command::SolveOpenLoop, "solve-open-loop", "open-loop equilibrium control"},
    {Command::SolveFeedback, "solve-feedback", "feedback equilibrium strategy"},
    {Command::SolveMixed, "solve-mixed", "mixed equilibrium solution for a given Phi"},
    {Command::Verify, "verify", "spike-deviation check on a moment-matched tree"},
    {Command::Simulate, "simulate", "Monte Carlo simulation of terminal wealth"},
    {Command::ReproduceExample, "reproduce-example",
     "solve the example preset and compare with the reference tables"},
    {Command::Batch, "batch", "mixed solutions for a batch of sampled Phi draws"},
};

std::string command_name(Command c) {
  for (const auto& info : kCommands) {
    if (info.command == c) return info.name;
  }
  return "unknown";
}

// Everything that maps to exit status 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string vec_str(const Eigen::VectorXd& v, int decimals = 4) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt::format("{:.{}f}", v[i], decimals);
  }
  return s + ")";
}

json vec_json(const Eigen::VectorXd& v) {
  auto a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string full(double v) { return fmt::format("{:.17g}", v); }

MarketSpec load_spec(const RunConfig& config) {
  const ValidationOptions vopt{config.tol_psd};
  MarketSpec spec = is_preset(config.market)
                        ? preset_market(config.market)
                        : load_market_spec_file(config.market, vopt);
  if (config.t || config.x) {
    if (config.t) spec.initial_time = *config.t;
    if (config.x) spec.initial_wealth = *config.x;
  }
  spec = validate_market_spec(std::move(spec), vopt);
  for (const auto& w : spec.warnings) spdlog::warn("market: {}", w);
  spdlog::info("market '{}': N = {}, m = {}, t = {}, x = {}", config.market,
               spec.horizon, spec.num_assets, spec.initial_time, spec.initial_wealth);
  return spec;
}

SolverOptions solver_options(const RunConfig& config) {
  SolverOptions o;
  o.range_tol = config.tol_range;
  o.psd_tol = config.tol_psd;
  o.dagger_tol = config.tol_dagger;
  return o;
}

PureFeedbackPart load_phi(const RunConfig& config, const MarketSpec& spec) {
  if (config.phi == "zero") return PureFeedbackPart::zero(spec.horizon, spec.num_assets);
  if (config.phi == "sample") {
    return sample_pure_feedback(config.seed, spec.horizon, spec.num_assets);
  }
  if (config.phi == "example") return example_pure_feedback();
  std::ifstream in(config.phi);
  if (!in) throw ConfigError(fmt::format("cannot open phi file '{}'", config.phi));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_pure_feedback(buffer.str());
}

int report_nonexistence(std::string_view what, const NonexistenceReport& report,
                        std::ostream& err) {
  err << fmt::format("no {} exists: {}\n", what, report.describe());
  return kExitNonexistence;
}

void emit_phi_pretty(std::ostream& out, const PureFeedbackPart& phi) {
  out << "Phi:";
  if (phi.provenance == PhiProvenance::Sampled && phi.seed) {
    out << fmt::format(" sampled with seed {}", *phi.seed);
  }
  out << '\n';
  for (std::size_t k = 0; k < phi.phi.size(); ++k) {
    out << fmt::format("  Phi_{} = {}\n", k, vec_str(phi.phi[k]));
  }
}

// ---- solve-* --------------------------------------------------------------

int run_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const MarketSpec spec = load_spec(config);
  const ExcessMoments moments = derive_excess_moments(spec);
  const SolverOptions options = solver_options(config);

  std::string title;
  std::optional<AffinePolicy> policy;
  json trace_json;
  std::function<void(std::ostream&)> trace_csv;
  std::function<void(std::ostream&)> extra_pretty = [](std::ostream&) {};
  json extra_json = json::object();

  const auto started = std::chrono::steady_clock::now();
  if (config.command == Command::SolveOpenLoop) {
    auto r = solve_open_loop(moments, spec, options);
    if (!r) return report_nonexistence("open-loop equilibrium control", r.failure(), err);
    title = "open-loop equilibrium control";
    policy = r->policy;
    trace_json = trace_to_json(r->trace);
    trace_csv = [tr = r->trace](std::ostream& o) { write_trace_csv(o, tr); };
  } else if (config.command == Command::SolveFeedback) {
    auto r = solve_feedback(moments, spec, options);
    if (!r) return report_nonexistence("feedback equilibrium strategy", r.failure(), err);
    title = "feedback equilibrium strategy";
    policy = r->policy;
    trace_json = trace_to_json(r->trace);
    trace_csv = [tr = r->trace](std::ostream& o) { write_trace_csv(o, tr); };
  } else {
    const PureFeedbackPart phi = load_phi(config, spec);
    auto r = solve_mixed(moments, spec, phi, options);
    if (!r) return report_nonexistence("mixed equilibrium solution", r.failure(), err);
    title = "mixed equilibrium solution (applied K_k, c_k)";
    policy = r->applied;
    trace_json = trace_to_json(r->trace);
    trace_csv = [tr = r->trace](std::ostream& o) { write_trace_csv(o, tr); };
    const MixedSolution sol = r.value();
    extra_pretty = [sol, t = spec.initial_time, n = spec.horizon](std::ostream& o) {
      emit_phi_pretty(o, sol.phi);
      o << "eigenvalues of O_k (ascending):\n";
      for (int k = t; k < n; ++k) {
        o << fmt::format("  k = {}: {}\n", k, vec_str(sol.trace.o_eigs[static_cast<std::size_t>(k)]));
      }
    };
    auto eigs = json::array();
    for (int k = spec.initial_time; k < spec.horizon; ++k) {
      eigs.push_back(vec_json(sol.trace.o_eigs[static_cast<std::size_t>(k)]));
    }
    auto phis = json::array();
    for (const auto& p : sol.phi.phi) phis.push_back(vec_json(p));
    extra_json["phi"] = phis;
    extra_json["o_eigenvalues"] = eigs;
  }
  spdlog::info("{} solved in {:.3f} ms", command_name(config.command),
               std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - started).count());

  if (config.trace_out) {
    std::ofstream trace_file(*config.trace_out);
    if (!trace_file) {
      throw ConfigError(fmt::format("cannot write trace to '{}'", *config.trace_out));
    }
    if (config.format == OutputFormat::Json) {
      trace_file << trace_json.dump(2) << '\n';
    } else {
      trace_csv(trace_file);
    }
  }

  switch (config.format) {
    case OutputFormat::Pretty:
      out << fmt::format("{} (t = {}, x = {})\n", title, spec.initial_time,
                         spec.initial_wealth);
      out << format_policy_table(*policy, 4);
      extra_pretty(out);
      break;
    case OutputFormat::Csv:
      write_policy_csv(out, *policy);
      break;
    case OutputFormat::Json: {
      json j;
      j["command"] = command_name(config.command);
      j["policy"] = policy_to_json(*policy);
      j["trace"] = trace_json;
      for (auto it = extra_json.begin(); it != extra_json.end(); ++it) j[it.key()] = it.value();
      out << j.dump(2) << '\n';
      break;
    }
  }
  return kExitOk;
}

// ---- verify / simulate ----------------------------------------------------

struct SolvedPolicy {
  std::optional<AffinePolicy> policy;
  std::optional<NonexistenceReport> failure;
};

SolvedPolicy solve_for(const RunConfig& config, const MarketSpec& spec,
                       const ExcessMoments& moments) {
  const SolverOptions options = solver_options(config);
  const auto take = [](const auto& r, auto get) -> SolvedPolicy {
    if (!r) return {std::nullopt, r.failure()};
    return {get(r.value()), std::nullopt};
  };
  if (config.solver == "open-loop") {
    return take(solve_open_loop(moments, spec, options),
                [](const OpenLoopSolution& s) { return s.policy; });
  }
  if (config.solver == "feedback") {
    return take(solve_feedback(moments, spec, options),
                [](const FeedbackSolution& s) { return s.policy; });
  }
  if (config.solver == "mixed") {
    return take(solve_mixed(moments, spec, load_phi(config, spec), options),
                [](const MixedSolution& s) { return s.applied; });
  }
  throw ConfigError(fmt::format("unknown solver '{}'", config.solver));
}

DeviationSemantics parse_semantics(const std::string& s) {
  if (s == "open-loop") return DeviationSemantics::OpenLoop;
  if (s == "feedback") return DeviationSemantics::Feedback;
  if (s == "mixed") return DeviationSemantics::Mixed;
  throw ConfigError(fmt::format("unknown semantics '{}'", s));
}

ScenarioTree tree_for(const RunConfig& config, const MarketSpec& spec,
                      const ExcessMoments& moments) {
  const int atoms = config.atoms.value_or(2 * spec.num_assets + 1);
  try {
    ScenarioTree tree = build_matched_tree(moments, atoms, config.tree_seed);
    spdlog::info("matched tree: {} leaf paths", tree.leaf_count(0));
    return tree;
  } catch (const InfeasibleTreeError& e) {
    throw ConfigError(e.what());
  }
}

int run_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const MarketSpec spec = load_spec(config);
  const ExcessMoments moments = derive_excess_moments(spec);
  const SolvedPolicy solved = solve_for(config, spec, moments);
  if (!solved.policy) return report_nonexistence(config.solver + " solution", *solved.failure, err);
  const AffinePolicy& policy = *solved.policy;
  const DeviationSemantics semantics =
      config.semantics ? parse_semantics(*config.semantics) : native_semantics(policy);

  const ScenarioTree tree = tree_for(config, spec, moments);
  std::vector<DeviationReport> reports;
  try {
    reports = verify_equilibrium(tree, spec, policy, spec.initial_wealth, semantics,
                                 VerifyOptions{config.tol_verify, config.threads});
  } catch (const PathCountError& e) {
    throw ConfigError(e.what());
  } catch (const NonConvexDeviationError& e) {
    err << "verification failed: " << e.what() << '\n';
    return kExitVerification;
  }
  const VerificationSummary summary = summarize(reports);

  switch (config.format) {
    case OutputFormat::Json:
      write_deviation_jsonl(out, reports);
      break;
    case OutputFormat::Csv:
      out << "stage,node,state,j_star,j_dev,gap,tolerance,passed\n";
      for (const auto& r : reports) {
        out << fmt::format("{},{},{},{},{},{},{},{}\n", r.stage, r.node_id, full(r.state),
                           full(r.j_star), full(r.j_dev), full(r.gap), full(r.tolerance),
                           r.passed ? 1 : 0);
      }
      break;
    case OutputFormat::Pretty: {
      out << fmt::format("verify {} policy under {} semantics, tree with {} leaf paths\n",
                         config.solver, to_string(semantics), tree.leaf_count(0));
      out << fmt::format("{:>5} {:>8} {:>14} {:>14} {:>9}\n", "k", "nodes", "J* (first)",
                         "min gap", "failures");
      for (int k = policy.start_stage(); k < spec.horizon; ++k) {
        std::size_t nodes = 0, failures = 0;
        double min_gap = std::numeric_limits<double>::infinity();
        double first_j = 0.0;
        for (const auto& r : reports) {
          if (r.stage != k) continue;
          if (nodes++ == 0) first_j = r.j_star;
          min_gap = std::min(min_gap, r.gap);
          failures += r.passed ? 0 : 1;
        }
        out << fmt::format("{:>5} {:>8} {:>14.6f} {:>14.3e} {:>9}\n", k, nodes, first_j,
                           min_gap, failures);
      }
      out << fmt::format("{}: {} records, {} failures, min gap {:.3e}\n",
                         summary.passed ? "PASS" : "FAIL", summary.records,
                         summary.failures, summary.min_gap);
      break;
    }
  }
  return summary.passed ? kExitOk : kExitVerification;
}

int run_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const MarketSpec spec = load_spec(config);
  const ExcessMoments moments = derive_excess_moments(spec);
  const SolvedPolicy solved = solve_for(config, spec, moments);
  if (!solved.policy) return report_nonexistence(config.solver + " solution", *solved.failure, err);

  MonteCarloOptions mc;
  mc.threads = config.threads;
  std::optional<ScenarioTree> tree;
  std::optional<CostBreakdown> exact;
  if (config.distribution == "tree") {
    tree = tree_for(config, spec, moments);
    mc.distribution = ReturnDistribution::TreeSampling;
    mc.tree = &*tree;
    exact = evaluate_cost_breakdown(*tree, spec, *solved.policy, spec.initial_time,
                                    spec.initial_wealth,
                                    native_semantics(*solved.policy));
  } else if (config.distribution != "gaussian") {
    throw ConfigError(fmt::format("unknown distribution '{}'", config.distribution));
  }
  const SimulationSummary s = simulate_monte_carlo(
      spec, moments, *solved.policy, spec.initial_wealth, config.paths, config.seed, mc);

  switch (config.format) {
    case OutputFormat::Pretty:
      out << fmt::format("simulate {} policy, {} paths, seed {}, {} returns\n",
                         config.solver, s.paths, config.seed, config.distribution);
      out << fmt::format("  E X_N   = {:.6f} (se {:.6f})\n", s.mean, s.mean_se);
      out << fmt::format("  Var X_N = {:.6f} (se {:.6f})\n", s.variance, s.variance_se);
      out << fmt::format("  J       = {:.6f} (se {:.6f})\n", s.cost, s.cost_se);
      if (exact) {
        out << fmt::format("  exact J on the tree = {:.6f} ({:+.2f} se)\n", exact->cost,
                           (s.cost - exact->cost) / s.cost_se);
      }
      break;
    case OutputFormat::Csv:
      out << "paths,seed,mean,variance,cost,mean_se,variance_se,cost_se";
      if (exact) out << ",exact_mean,exact_variance,exact_cost";
      out << '\n';
      out << fmt::format("{},{},{},{},{},{},{},{}", s.paths, config.seed, full(s.mean),
                         full(s.variance), full(s.cost), full(s.mean_se),
                         full(s.variance_se), full(s.cost_se));
      if (exact) {
        out << fmt::format(",{},{},{}", full(exact->mean), full(exact->variance),
                           full(exact->cost));
      }
      out << '\n';
      break;
    case OutputFormat::Json: {
      json j{{"paths", s.paths},       {"seed", config.seed},
             {"distribution", config.distribution},
             {"mean", s.mean},         {"variance", s.variance},
             {"cost", s.cost},         {"mean_se", s.mean_se},
             {"variance_se", s.variance_se}, {"cost_se", s.cost_se}};
      if (exact) {
        j["exact"] = {{"mean", exact->mean}, {"variance", exact->variance},
                      {"cost", exact->cost}};
      }
      out << j.dump(2) << '\n';
      break;
    }
  }
  return kExitOk;
}

// ---- reproduce-example ------------------------------------------------------

struct ReferenceTable {
  std::string name;
  std::vector<std::vector<double>> gains;    // k = 0..3
  std::vector<std::vector<double>> offsets;  // k = 0..3
};

const std::vector<double> kTerminal{0.4739, 0.7689, 2.7381};

ReferenceTable open_loop_reference() {
  return {"open-loop",
          {{0.1391, 0.2257, 0.8038}, {0.1842, 0.2988, 1.0643},
           {0.2676, 0.4341, 1.5461}, kTerminal},
          {{0.1391, 0.2257, 0.8038}, {0.1842, 0.2988, 1.0643},
           {0.2676, 0.4341, 1.5461}, kTerminal}};
}

ReferenceTable feedback_reference() {
  return {"feedback",
          {{0.0077, 0.0124, 0.0443}, {0.0168, 0.0273, 0.0971},
           {0.0333, 0.0540, 0.1923}, kTerminal},
          {{0.0730, 0.1185, 0.4220}, {0.0922, 0.1496, 0.5328},
           {0.1221, 0.1981, 0.7055}, kTerminal}};
}

ReferenceTable mixed_reference() {
  return {"mixed",
          {{0.2274, 0.3689, 1.3137}, {0.3611, 0.5858, 2.0862},
           {0.3382, 0.5486, 1.9537}, kTerminal},
          {{0.2195, 0.3561, 1.2683}, {0.3543, 0.5747, 2.0468},
           {0.3365, 0.5460, 1.9443}, kTerminal}};
}

const std::vector<double> kMixedO3Eigenvalues{0.0041, 0.0318, 0.0930};

struct Comparison {
  std::string table;
  std::string quantity;
  int stage = 0;
  int index = 0;
  double value = 0.0;
  double reference = 0.0;
  bool ok() const { return std::abs(value - reference) <= kReproduceTol; }
};

void compare_policy(const AffinePolicy& policy, const ReferenceTable& ref,
                    std::vector<Comparison>& rows) {
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 3; ++i) {
      const auto uk = static_cast<std::size_t>(k);
      const auto ui = static_cast<std::size_t>(i);
      rows.push_back({ref.name, "K", k, i, policy.gain(k)[i], ref.gains[uk][ui]});
      rows.push_back({ref.name, "c", k, i, policy.offset(k)[i], ref.offsets[uk][ui]});
    }
  }
}

int run_reproduce(const RunConfig& config, std::ostream& out, std::ostream& err) {
  MarketSpec spec = preset_market(kExamplePreset);
  spec.initial_time = 0;
  spec.initial_wealth = 1.0;
  const ExcessMoments moments = derive_excess_moments(spec);
  const SolverOptions options = solver_options(config);

  const auto ol = solve_open_loop(moments, spec, options);
  if (!ol) return report_nonexistence("open-loop equilibrium control", ol.failure(), err);
  const auto fb = solve_feedback(moments, spec, options);
  if (!fb) return report_nonexistence("feedback equilibrium strategy", fb.failure(), err);
  const auto mx = solve_mixed(moments, spec, example_pure_feedback(), options);
  if (!mx) return report_nonexistence("mixed equilibrium solution", mx.failure(), err);

  std::vector<Comparison> rows;
  compare_policy(ol->policy, open_loop_reference(), rows);
  compare_policy(fb->policy, feedback_reference(), rows);
  compare_policy(mx->applied, mixed_reference(), rows);
  for (int i = 0; i < 3; ++i) {
    rows.push_back({"mixed", "eig_O", 3, i, mx->trace.o_eigs[3][i],
                    kMixedO3Eigenvalues[static_cast<std::size_t>(i)]});
  }
  std::size_t mismatches = 0;
  for (const auto& r : rows) mismatches += r.ok() ? 0 : 1;

  switch (config.format) {
    case OutputFormat::Pretty: {
      const auto table = [&](const std::string& heading, const AffinePolicy& p,
                             const std::string& name) {
        out << heading << '\n' << format_policy_table(p, 4);
        for (const auto& r : rows) {
          if (r.table == name && !r.ok()) {
            out << fmt::format("  mismatch {}_{}[{}]: {:.4f} vs reference {:.4f}\n",
                               r.quantity, r.stage, r.index + 1, r.value, r.reference);
          }
        }
        out << '\n';
      };
      out << "example market: N = 4, m = 3, s = 1.04, mu1 = mu2 = 1, x = 1\n\n";
      table("open-loop equilibrium control (K_k = c_k)", ol->policy, "open-loop");
      table("feedback equilibrium strategy", fb->policy, "feedback");
      emit_phi_pretty(out, mx->phi);
      out << fmt::format("eigenvalues of O_3: {}\n", vec_str(mx->trace.o_eigs[3]));
      table("mixed equilibrium solution", mx->applied, "mixed");
      out << fmt::format("{}: {} of {} values outside {:g}\n",
                         mismatches == 0 ? "PASS" : "FAIL", mismatches, rows.size(),
                         kReproduceTol);
      break;
    }
    case OutputFormat::Csv:
      out << "table,quantity,stage,index,value,reference,ok\n";
      for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{}\n", r.table, r.quantity, r.stage,
                           r.index + 1, full(r.value), full(r.reference), r.ok() ? 1 : 0);
      }
      break;
    case OutputFormat::Json: {
      auto arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"table", r.table}, {"quantity", r.quantity}, {"stage", r.stage},
                       {"index", r.index + 1}, {"value", r.value},
                       {"reference", r.reference}, {"ok", r.ok()}});
      }
      out << json{{"comparisons", arr}, {"mismatches", mismatches},
                  {"tolerance", kReproduceTol}}.dump(2)
          << '\n';
      break;
    }
  }
  if (mismatches > 0) {
    err << fmt::format("reproduce-example: {} values deviate by more than {:g}\n",
                       mismatches, kReproduceTol);
    return kExitVerification;
  }
  return kExitOk;
}

// ---- batch ----------------------------------------------------------------

bool is_psd_eigs(const Eigen::VectorXd& eigs, double tol) {
  return eigs.size() == 0 || eigs.minCoeff() >= -tol * std::max(1.0, eigs.maxCoeff());
}

int run_batch(const RunConfig& config, std::ostream& out, std::ostream&) {
  const MarketSpec spec = load_spec(config);
  const ExcessMoments moments = derive_excess_moments(spec);
  const SolverOptions options = solver_options(config);

  struct Draw {
    std::uint64_t seed;
    PureFeedbackPart phi;
    std::optional<MixedSolution> solution;
    std::optional<NonexistenceReport> failure;
  };
  std::vector<Draw> draws;
  for (int d = 0; d < config.draws; ++d) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(d);
    Draw draw{seed, sample_pure_feedback(seed, spec.horizon, spec.num_assets), {}, {}};
    auto r = solve_mixed(moments, spec, draw.phi, options);
    if (r) {
      draw.solution = r.value();
    } else {
      draw.failure = r.failure();
    }
    draws.push_back(std::move(draw));
  }

  const int m = spec.num_assets;
  const int t = spec.initial_time;
  std::size_t indefinite = 0;
  for (const auto& d : draws) {
    if (!d.solution) continue;
    for (int k = t; k < spec.horizon; ++k) {
      if (!is_psd_eigs(d.solution->trace.o_eigs[static_cast<std::size_t>(k)], config.tol_psd)) {
        ++indefinite;
        break;
      }
    }
  }

  switch (config.format) {
    case OutputFormat::Pretty:
      out << fmt::format("{} Phi draws (seeds {}..{})\n", config.draws, config.seed,
                         config.seed + static_cast<std::uint64_t>(std::max(config.draws, 1) - 1));
      for (std::size_t i = 0; i < draws.size(); ++i) {
        const Draw& d = draws[i];
        out << fmt::format("draw {} (seed {})\n", i, d.seed);
        for (int k = 0; k < spec.horizon; ++k) {
          out << fmt::format("  Phi_{} = {}\n", k, vec_str(d.phi.phi[static_cast<std::size_t>(k)]));
        }
        if (!d.solution) {
          out << "  not solvable: " << d.failure->describe() << '\n';
          continue;
        }
        for (int k = t; k < spec.horizon; ++k) {
          out << fmt::format("  eigenvalues of O_{}: {}\n", k,
                             vec_str(d.solution->trace.o_eigs[static_cast<std::size_t>(k)]));
        }
      }
      out << fmt::format("draws with an indefinite O_k: {} of {}\n", indefinite, draws.size());
      break;
    case OutputFormat::Csv:
      out << "draw,seed,solvable,min_eig";
      for (int k = t; k < spec.horizon; ++k) {
        out << ",solvable_" << k;
        for (int i = 1; i <= m; ++i) out << fmt::format(",eig_{}_{}", k, i);
      }
      out << '\n';
      for (std::size_t i = 0; i < draws.size(); ++i) {
        const Draw& d = draws[i];
        double min_eig = std::numeric_limits<double>::infinity();
        std::string cells;
        for (int k = t; k < spec.horizon; ++k) {
          const auto uk = static_cast<std::size_t>(k);
          const bool solved = d.solution && d.solution->trace.solvable[uk];
          cells += solved ? ",1" : ",0";
          for (int j = 0; j < m; ++j) {
            cells += ',';
            if (solved) {
              const double e = d.solution->trace.o_eigs[uk][j];
              min_eig = std::min(min_eig, e);
              cells += full(e);
            }
          }
        }
        out << fmt::format("{},{},{},{}{}\n", i, d.seed, d.solution ? 1 : 0,
                           d.solution ? full(min_eig) : std::string(), cells);
      }
      break;
    case OutputFormat::Json: {
      auto arr = json::array();
      for (std::size_t i = 0; i < draws.size(); ++i) {
        const Draw& d = draws[i];
        json j{{"draw", i}, {"seed", d.seed}};
        auto phis = json::array();
        for (const auto& p : d.phi.phi) phis.push_back(vec_json(p));
        j["phi"] = phis;
        if (d.solution) {
          auto eigs = json::array();
          for (int k = t; k < spec.horizon; ++k) {
            eigs.push_back(vec_json(d.solution->trace.o_eigs[static_cast<std::size_t>(k)]));
          }
          j["o_eigenvalues"] = eigs;
          j["policy"] = policy_to_json(d.solution->applied);
        } else {
          j["failure"] = d.failure->describe();
        }
        arr.push_back(std::move(j));
      }
      out << json{{"draws", arr}, {"indefinite_draws", indefinite}}.dump(2) << '\n';
      break;
    }
  }
  return kExitOk;
}

}  // namespace

void validate_config(const RunConfig& config) {
  for (const auto& [name, value] :
       {std::pair{"--tol-range", config.tol_range}, std::pair{"--tol-psd", config.tol_psd},
        std::pair{"--tol-dagger", config.tol_dagger},
        std::pair{"--tol-verify", config.tol_verify}}) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ConfigError(fmt::format("{} must be a positive number", name));
    }
  }
  if (config.market.empty()) throw ConfigError("--market is required");
  if (config.command == Command::Simulate && config.paths < 2) {
    throw ConfigError("--paths must be >= 2");
  }
  if (config.command == Command::Batch && config.draws < 1) {
    throw ConfigError("--draws must be >= 1");
  }
  if (config.threads < 1) throw ConfigError("--threads must be >= 1");
  if (config.atoms && *config.atoms < 1) throw ConfigError("--atoms must be >= 1");
  if (config.x && !std::isfinite(*config.x)) throw ConfigError("--x must be finite");
}

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv,
                                            std::ostream& out, std::ostream& err,
                                            int& exit_code) {
  RunConfig config;
  CLI::App app{"Equilibrium strategies for multi-period mean-variance portfolio selection"};
  app.require_subcommand(1);

  std::string format = "pretty";
  std::string market = config.market;
  std::optional<int> t;
  std::optional<double> x;
  std::optional<int> atoms;
  std::optional<std::uint64_t> tree_seed;
  std::optional<std::string> out_path, trace_path, semantics;

  for (const auto& info : kCommands) {
    CLI::App* sub = app.add_subcommand(info.name, info.help);
    sub->add_option("--market", market, "preset name or market JSON file")
        ->capture_default_str();
    sub->add_option("--t", t, "initial stage");
    sub->add_option("--x", x, "initial wealth");
    sub->add_option("--tol-range", config.tol_range, "range-condition tolerance")
        ->capture_default_str();
    sub->add_option("--tol-psd", config.tol_psd, "PSD tolerance")->capture_default_str();
    sub->add_option("--tol-dagger", config.tol_dagger, "scalar pseudo-inverse threshold")
        ->capture_default_str();
    sub->add_option("--format", format, "pretty | csv | json")
        ->check(CLI::IsMember({"pretty", "csv", "json"}))
        ->capture_default_str();
    sub->add_option("--out", out_path, "write output to this file");
    sub->add_option("--seed", config.seed, "random seed")->capture_default_str();
    sub->add_option("--phi", config.phi, "pure-feedback part: <path> | sample | zero | example")
        ->capture_default_str();

    switch (info.command) {
      case Command::SolveOpenLoop:
      case Command::SolveFeedback:
      case Command::SolveMixed:
        sub->add_option("--trace", trace_path, "write the recursion trace to this file");
        break;
      case Command::Verify:
      case Command::Simulate:
        sub->add_option("--solver", config.solver, "open-loop | feedback | mixed")
            ->check(CLI::IsMember({"open-loop", "feedback", "mixed"}))
            ->capture_default_str();
        sub->add_option("--atoms", atoms, "atoms per stage of the matched tree (default 2m+1)");
        sub->add_option("--tree-seed", tree_seed, "random rotation of the tree atoms");
        sub->add_option("--threads", config.threads, "worker threads")->capture_default_str();
        if (info.command == Command::Verify) {
          sub->add_option("--semantics", semantics,
                          "open-loop | feedback | mixed (default: the solver's own)")
              ->check(CLI::IsMember({"open-loop", "feedback", "mixed"}));
          sub->add_option("--tol-verify", config.tol_verify,
                          "relative gap tolerance")->capture_default_str();
        } else {
          sub->add_option("--paths", config.paths, "number of paths")->capture_default_str();
          sub->add_option("--distribution", config.distribution, "gaussian | tree")
              ->check(CLI::IsMember({"gaussian", "tree"}))
              ->capture_default_str();
        }
        break;
      case Command::Batch:
        sub->add_option("--draws", config.draws, "number of Phi draws")->capture_default_str();
        break;
      case Command::ReproduceExample:
        break;
    }
    sub->callback([&config, c = info.command] { config.command = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    exit_code = app.exit(e, out, err);
    if (exit_code != 0) exit_code = kExitValidation;
    return std::nullopt;
  }

  config.market = market;
  config.t = t;
  config.x = x;
  config.atoms = atoms;
  config.tree_seed = tree_seed;
  config.out = out_path;
  config.trace_out = trace_path;
  config.semantics = semantics;
  config.format = format == "csv"    ? OutputFormat::Csv
                  : format == "json" ? OutputFormat::Json
                                     : OutputFormat::Pretty;
  exit_code = kExitOk;
  return config;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate_config(config);
    std::unique_ptr<std::ofstream> file;
    std::ostream* sink = &out;
    if (config.out) {
      file = std::make_unique<std::ofstream>(*config.out);
      if (!*file) throw ConfigError(fmt::format("cannot write '{}'", *config.out));
      sink = file.get();
    }
    switch (config.command) {
      case Command::SolveOpenLoop:
      case Command::SolveFeedback:
      case Command::SolveMixed:
        return run_solve(config, *sink, err);
      case Command::Verify:
        return run_verify(config, *sink, err);
      case Command::Simulate:
        return run_simulate(config, *sink, err);
      case Command::ReproduceExample:
        return run_reproduce(config, *sink, err);
      case Command::Batch:
        return run_batch(config, *sink, err);
    }
    return kExitInternal;
  } catch (const InternalInconsistencyError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace mveq::cli
