#include "mveq/mixed_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

namespace mveq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDirectFormTol = 1e-9;

double relative_range_residual(const Eigen::MatrixXd& m,
                               const Eigen::MatrixXd& m_pinv,
                               const Eigen::VectorXd& v) {
  return (m * (m_pinv * v) - v).norm() / std::max(1.0, v.norm());
}

}  // namespace

PureFeedbackPart PureFeedbackPart::zero(int horizon, int num_assets) {
  PureFeedbackPart p;
  p.phi.assign(static_cast<std::size_t>(horizon), Eigen::VectorXd::Zero(num_assets));
  return p;
}

PureFeedbackPart PureFeedbackPart::user(std::vector<Eigen::VectorXd> phi) {
  PureFeedbackPart p;
  p.phi = std::move(phi);
  return p;
}

PureFeedbackPart sample_pure_feedback(std::uint64_t seed, int horizon,
                                      int num_assets) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PureFeedbackPart p;
  p.provenance = PhiProvenance::Sampled;
  p.seed = seed;
  for (int k = 0; k < horizon; ++k) {
    Eigen::VectorXd v(num_assets);
    for (int i = 0; i < num_assets; ++i) v[i] = normal(engine);
    p.phi.push_back(std::move(v));
  }
  return p;
}

PureFeedbackPart parse_pure_feedback(std::string_view json_text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("malformed phi file: {}", e.what()));
  }
  if (!root.is_array()) throw ParseError("phi must be an array [N][m]");
  std::vector<Eigen::VectorXd> phi;
  for (const auto& row : root) {
    if (!row.is_array()) throw ParseError("phi must be an array [N][m]");
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!row[i].is_number()) throw ParseError("phi entries must be numbers");
      v[static_cast<Eigen::Index>(i)] = row[i].get<double>();
    }
    phi.push_back(std::move(v));
  }
  return PureFeedbackPart::user(std::move(phi));
}

SolveResult<MixedSolution> solve_mixed(const ExcessMoments& moments,
                                       const MarketSpec& spec,
                                       const PureFeedbackPart& phi_part,
                                       const SolverOptions& options) {
  const int n = spec.horizon;
  const int t = spec.initial_time;
  const auto un = static_cast<std::size_t>(n);

  if (phi_part.phi.size() != un) {
    throw std::invalid_argument(fmt::format(
        "phi must have {} stages, got {}", n, phi_part.phi.size()));
  }
  for (std::size_t k = 0; k < un; ++k) {
    if (phi_part.phi[k].size() != spec.num_assets || !phi_part.phi[k].allFinite()) {
      throw std::invalid_argument(fmt::format(
          "phi at stage {} must be a finite vector of length {}", k, spec.num_assets));
    }
  }

  MixedTrace tr;
  for (auto* seq : {&tr.s, &tr.scal, &tr.t, &tr.tcal, &tr.u, &tr.pi}) {
    seq->assign(un + 1, kNaN);
  }
  tr.beta.resize(un);
  tr.o_mix.resize(un);
  tr.l_mix.resize(un);
  tr.theta_mix.resize(un);
  tr.solvable.assign(un, false);
  tr.o_eigs.resize(un);
  tr.s_level_psd.assign(un, false);
  tr.residual_l.assign(un, kNaN);
  tr.residual_theta.assign(un, kNaN);

  tr.s[un] = 1.0;
  tr.scal[un] = 0.0;
  tr.t[un] = 0.0;
  tr.tcal[un] = 0.0;
  tr.u[un] = -0.5 * spec.mu1;
  tr.pi[un] = -0.5 * spec.mu2;

  const std::size_t len = un - static_cast<std::size_t>(t);
  std::vector<Eigen::VectorXd> gains(len), offsets(len), phis(len), v_gain(len);

  for (int k = n - 1; k >= t; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const double s = spec.riskless[uk];
    const Eigen::VectorXd& e = moments.mean_excess[uk];
    const Eigen::MatrixXd& cov = moments.cov_excess[uk];
    const Eigen::VectorXd& phi = phi_part.phi[uk];
    const Eigen::MatrixXd eet = e * e.transpose();

    const double big_s = tr.s[uk + 1];
    const double cal_s = tr.scal[uk + 1];
    const double st = big_s + tr.t[uk + 1];       // S_{k+1} + T_{k+1}
    const double cal_st = cal_s + tr.tcal[uk + 1];  // Scal_{k+1} + Tcal_{k+1}

    tr.s_level_psd[uk] = numerics::is_psd(cal_s * eet + big_s * cov, options.psd_tol);

    const Eigen::MatrixXd o = cal_st * eet + st * cov;
    tr.o_mix[uk] = o;
    tr.o_eigs[uk] = numerics::symmetric_eigenvalues(o);
    tr.l_mix[uk] = (s * cal_st + tr.u[uk + 1]) * e;
    tr.theta_mix[uk] = tr.pi[uk + 1] * e;

    const Eigen::MatrixXd o_pinv = numerics::pseudoinverse(o, options.pinv_tol).pinv;
    tr.residual_l[uk] = relative_range_residual(o, o_pinv, tr.l_mix[uk]);
    tr.residual_theta[uk] = relative_range_residual(o, o_pinv, tr.theta_mix[uk]);
    if (tr.residual_l[uk] > options.range_tol) {
      return NonexistenceReport{k, FailingCondition::SolvabilityL,
                                tr.residual_l[uk], options.range_tol};
    }
    if (tr.residual_theta[uk] > options.range_tol) {
      return NonexistenceReport{k, FailingCondition::SolvabilityTheta,
                                tr.residual_theta[uk], options.range_tol};
    }
    tr.solvable[uk] = true;

    const Eigen::VectorXd gain = -o_pinv * tr.l_mix[uk];
    const Eigen::VectorXd offset = -o_pinv * tr.theta_mix[uk];
    const std::size_t i = uk - static_cast<std::size_t>(t);
    gains[i] = gain;
    offsets[i] = offset;
    phis[i] = phi;
    v_gain[i] = gain - phi;

    const double g = s + e.dot(phi);                     // s + E O^T Phi
    const double a = s + e.dot(gain);                    // s - E O^T O^dagger L
    const double phi_cov_phi = phi.dot(cov * phi);
    const double r = -phi.dot(cov * gain);               // Phi^T Cov O^dagger L

    tr.s[uk] = big_s * (g * g + phi_cov_phi);
    tr.scal[uk] = cal_s * g * g + big_s * phi_cov_phi;
    const double st_k = st * (g * a - r);
    const double cal_st_k = cal_st * g * a - st * r;
    tr.t[uk] = st_k - tr.s[uk];
    tr.tcal[uk] = cal_st_k - tr.scal[uk];

    if (options.cross_check_direct_t) {
      const Eigen::VectorXd dev = gain - phi;
      const double t_next = tr.t[uk + 1];
      const double tcal_next = tr.tcal[uk + 1];
      const double t_direct =
          big_s * (g * e.dot(dev) + phi.dot(cov * dev)) + t_next * (g * a - r);
      const double tcal_direct =
          cal_s * g * e.dot(dev) + big_s * phi.dot(cov * dev) +
          tcal_next * g * a - t_next * r;
      const double scale = std::max({1.0, std::abs(t_direct), std::abs(tcal_direct)});
      if (std::abs(t_direct - tr.t[uk]) > kDirectFormTol * scale ||
          std::abs(tcal_direct - tr.tcal[uk]) > kDirectFormTol * scale) {
        throw InternalInconsistencyError(fmt::format(
            "direct and combined T recursions disagree at stage {}: "
            "T {} vs {}, Tcal {} vs {}",
            k, t_direct, tr.t[uk], tcal_direct, tr.tcal[uk]));
      }
    }

    tr.u[uk] = g * tr.u[uk + 1];
    tr.beta[uk] = cal_st * g * e.transpose() + st * (phi.transpose() * cov);
    tr.pi[uk] = tr.beta[uk].dot(offset) + g * tr.pi[uk + 1];
  }

  MixedSolution out{
      phi_part,
      AffinePolicy(PolicyKind::MixedApplied, t, gains, offsets, std::move(phis)),
      std::move(v_gain),
      offsets,
      std::move(tr)};
  return out;
}

std::vector<double> mixed_equilibrium_wealth_mean(const MixedSolution& solution,
                                                  const ExcessMoments& moments,
                                                  const MarketSpec& spec) {
  return mean_wealth_path(solution.applied, moments, spec, spec.initial_wealth);
}

}  // namespace mveq
