#include "mveq/market_model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace mveq {

using nlohmann::json;

namespace {

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

double as_number(const json& j, const std::string& what) {
  if (!j.is_number()) {
    throw ParseError(fmt::format("{} must be a number", what));
  }
  return j.get<double>();
}

int as_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) {
    throw ParseError(fmt::format("{} must be an integer", what));
  }
  return j.get<int>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(fmt::format("{} must be an array", what));
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] =
        as_number(j[i], fmt::format("{}[{}]", what, i));
  }
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(fmt::format("{} must be an array", what));
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto row = as_vector(j[i], fmt::format("{}[{}]", what, i));
    if (row.size() != rows) {
      throw ValidationError(fmt::format("{} must be square ({} rows, row {} has {} entries)",
                                        what, rows, i, row.size()));
    }
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

bool is_matrix_like(const json& j) {
  return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() &&
         j[0][0].is_number();
}

bool is_vector_like(const json& j) {
  return j.is_array() && !j.empty() && j[0].is_number();
}

MarketSpec from_json(const json& root) {
  if (!root.is_object()) throw ParseError("market spec must be a JSON object");
  for (const char* key :
       {"horizon", "num_assets", "riskless", "mean_returns", "return_cov", "mu1", "mu2"}) {
    if (!root.contains(key)) {
      throw ParseError(fmt::format("missing required key '{}'", key));
    }
  }

  MarketSpec spec;
  spec.horizon = as_int(root.at("horizon"), "horizon");
  spec.num_assets = as_int(root.at("num_assets"), "num_assets");
  spec.mu1 = as_number(root.at("mu1"), "mu1");
  spec.mu2 = as_number(root.at("mu2"), "mu2");
  if (root.contains("initial_time")) {
    spec.initial_time = as_int(root.at("initial_time"), "initial_time");
  }
  if (root.contains("initial_wealth")) {
    spec.initial_wealth = as_number(root.at("initial_wealth"), "initial_wealth");
  }
  if (spec.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (spec.num_assets < 1) throw ValidationError("num_assets must be >= 1");
  const auto n = static_cast<std::size_t>(spec.horizon);

  const json& s = root.at("riskless");
  if (s.is_number()) {
    spec.riskless.assign(n, s.get<double>());
  } else {
    const Eigen::VectorXd v = as_vector(s, "riskless");
    spec.riskless.assign(v.data(), v.data() + v.size());
  }

  const json& mean = root.at("mean_returns");
  if (is_vector_like(mean)) {
    spec.mean_returns.assign(n, as_vector(mean, "mean_returns"));
  } else if (mean.is_array()) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      spec.mean_returns.push_back(as_vector(mean[k], fmt::format("mean_returns[{}]", k)));
    }
  } else {
    throw ParseError("mean_returns must be an array");
  }

  const json& cov = root.at("return_cov");
  if (is_matrix_like(cov)) {
    spec.return_cov.assign(n, as_matrix(cov, "return_cov"));
  } else if (cov.is_array()) {
    for (std::size_t k = 0; k < cov.size(); ++k) {
      spec.return_cov.push_back(as_matrix(cov[k], fmt::format("return_cov[{}]", k)));
    }
  } else {
    throw ParseError("return_cov must be an array");
  }
  return spec;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

bool operator==(const MarketSpec& a, const MarketSpec& b) {
  if (a.horizon != b.horizon || a.num_assets != b.num_assets ||
      a.mu1 != b.mu1 || a.mu2 != b.mu2 || a.initial_time != b.initial_time ||
      a.initial_wealth != b.initial_wealth || a.riskless != b.riskless ||
      a.mean_returns.size() != b.mean_returns.size() ||
      a.return_cov.size() != b.return_cov.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.mean_returns.size(); ++k) {
    if (!same_vector(a.mean_returns[k], b.mean_returns[k])) return false;
  }
  for (std::size_t k = 0; k < a.return_cov.size(); ++k) {
    if (!same_matrix(a.return_cov[k], b.return_cov[k])) return false;
  }
  return true;
}

MarketSpec validate_market_spec(MarketSpec spec, const ValidationOptions& options) {
  spec.warnings.clear();
  if (spec.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (spec.num_assets < 1) throw ValidationError("num_assets must be >= 1");
  if (spec.initial_time < 0 || spec.initial_time > spec.horizon - 1) {
    throw ValidationError(fmt::format("initial_time must lie in [0, {}], got {}",
                                      spec.horizon - 1, spec.initial_time));
  }
  if (!(spec.mu1 > 0.0)) throw ValidationError("mu1 must be > 0");
  if (!(spec.mu2 > 0.0)) throw ValidationError("mu2 must be > 0");
  if (!std::isfinite(spec.mu1) || !std::isfinite(spec.mu2) ||
      !std::isfinite(spec.initial_wealth)) {
    throw ValidationError("mu1, mu2 and initial_wealth must be finite");
  }

  const auto n = static_cast<std::size_t>(spec.horizon);
  const auto m = static_cast<Eigen::Index>(spec.num_assets);
  if (spec.riskless.size() != n) {
    throw ValidationError(fmt::format("riskless must have {} entries, got {}", n,
                                      spec.riskless.size()));
  }
  if (spec.mean_returns.size() != n) {
    throw ValidationError(fmt::format("mean_returns must have {} stages, got {}",
                                      n, spec.mean_returns.size()));
  }
  if (spec.return_cov.size() != n) {
    throw ValidationError(fmt::format("return_cov must have {} stages, got {}", n,
                                      spec.return_cov.size()));
  }

  bool low_riskless = false;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = spec.riskless[k];
    if (!std::isfinite(s) || !(s > 0.0)) {
      throw ValidationError(
          fmt::format("riskless return must be > 0 at stage {}", k));
    }
    low_riskless = low_riskless || s <= 1.0;

    if (spec.mean_returns[k].size() != m) {
      throw ValidationError(fmt::format(
          "mean_returns at stage {} must have {} entries", k, m));
    }
    if (!spec.mean_returns[k].allFinite()) {
      throw ValidationError(fmt::format("mean_returns not finite at stage {}", k));
    }

    Eigen::MatrixXd& cov = spec.return_cov[k];
    if (cov.rows() != m || cov.cols() != m) {
      throw ValidationError(
          fmt::format("return_cov at stage {} must be {}x{}", k, m, m));
    }
    if (!cov.allFinite()) {
      throw ValidationError(fmt::format("covariance not finite at stage {}", k));
    }
    if (!numerics::is_symmetric(cov, 1e-6)) {
      throw ValidationError(fmt::format("covariance not symmetric at stage {}", k));
    }
    cov = numerics::symmetrize(cov);
    if (!numerics::is_psd(cov, options.psd_tol)) {
      throw ValidationError(fmt::format("covariance not PSD at stage {}", k));
    }
  }
  if (low_riskless) {
    spec.warnings.emplace_back(
        "riskless gross return <= 1 at some stage; results remain defined but "
        "the usual s_k > 1 assumption does not hold");
  }
  return spec;
}

MarketSpec parse_market_spec(std::string_view text, const ValidationOptions& options) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed market file: {}", e.what()));
  }
  return validate_market_spec(from_json(root), options);
}

MarketSpec load_market_spec(std::istream& source, const ValidationOptions& options) {
  const std::string text{std::istreambuf_iterator<char>(source),
                         std::istreambuf_iterator<char>()};
  return parse_market_spec(text, options);
}

MarketSpec load_market_spec_file(const std::filesystem::path& path,
                                 const ValidationOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open market file '{}'", path.string()));
  return load_market_spec(in, options);
}

std::string market_spec_to_json(const MarketSpec& spec) {
  json root;
  root["horizon"] = spec.horizon;
  root["num_assets"] = spec.num_assets;
  root["riskless"] = spec.riskless;
  json means = json::array();
  for (const auto& v : spec.mean_returns) {
    means.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  root["mean_returns"] = std::move(means);
  json covs = json::array();
  for (const auto& c : spec.return_cov) covs.push_back(matrix_to_json(c));
  root["return_cov"] = std::move(covs);
  root["mu1"] = spec.mu1;
  root["mu2"] = spec.mu2;
  root["initial_time"] = spec.initial_time;
  root["initial_wealth"] = spec.initial_wealth;
  return root.dump(2);
}

MarketSpec stationary_market(int horizon, double riskless,
                             const Eigen::VectorXd& mean_returns,
                             const Eigen::MatrixXd& return_cov, double mu1,
                             double mu2, int initial_time, double initial_wealth) {
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  MarketSpec spec;
  spec.horizon = horizon;
  spec.num_assets = static_cast<int>(mean_returns.size());
  const auto n = static_cast<std::size_t>(horizon);
  spec.riskless.assign(n, riskless);
  spec.mean_returns.assign(n, mean_returns);
  spec.return_cov.assign(n, return_cov);
  spec.mu1 = mu1;
  spec.mu2 = mu2;
  spec.initial_time = initial_time;
  spec.initial_wealth = initial_wealth;
  return validate_market_spec(std::move(spec));
}

ExcessMoments derive_excess_moments(const MarketSpec& spec) {
  ExcessMoments out;
  const auto n = static_cast<std::size_t>(spec.horizon);
  out.mean_excess.reserve(n);
  out.cov_excess.reserve(n);
  out.second_moment.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::VectorXd excess =
        spec.mean_returns[k].array() - spec.riskless[k];
    out.mean_excess.push_back(excess);
    out.cov_excess.push_back(spec.return_cov[k]);
    out.second_moment.push_back(spec.return_cov[k] + excess * excess.transpose());
  }
  return out;
}

ExistenceReport check_open_loop_existence(const ExcessMoments& moments, int t,
                                          double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("range tolerance must be positive");
  ExistenceReport report;
  report.overall = true;
  for (int k = 0; k < moments.horizon(); ++k) {
    const auto r = numerics::range_membership(moments.mean_excess[k],
                                              moments.cov_excess[k], tol);
    report.per_stage.push_back(r.member);
    report.residual_norms.push_back(r.residual);
    if (k >= t && !r.member) report.overall = false;
  }
  return report;
}

}  // namespace mveq
