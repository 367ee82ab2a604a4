#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mveq/numerics.hpp"

namespace mveq {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One riskless asset plus m risky assets over N periods.
///
/// Wealth evolves as X_{k+1} = s_k X_k + O_k^T u_k, where O_k = e_k - s_k 1 is
/// the excess return of the risky assets and u_k the amounts held in them.
/// The investor at (t, x) minimises
///   Var_t(X_N) - (mu1 x + mu2) E_t X_N.
struct MarketSpec {
  int horizon = 0;
  int num_assets = 0;
  std::vector<double> riskless;                ///< s_k, gross
  std::vector<Eigen::VectorXd> mean_returns;   ///< E e_k, gross
  std::vector<Eigen::MatrixXd> return_cov;     ///< Cov(e_k)
  double mu1 = 1.0;
  double mu2 = 1.0;
  int initial_time = 0;
  double initial_wealth = 1.0;
  /// Non-fatal findings from validation (e.g. s_k <= 1).
  std::vector<std::string> warnings;
};

bool operator==(const MarketSpec& a, const MarketSpec& b);

struct ValidationOptions {
  double psd_tol = numerics::kDefaultPsdTol;
};

/// Symmetrises every covariance as (M + M^T)/2, then checks all invariants.
/// Throws ValidationError naming the first violated invariant (and stage).
MarketSpec validate_market_spec(MarketSpec spec,
                                const ValidationOptions& options = {});

/// Parses the JSON market format and validates it. Scalars for `riskless`,
/// a single vector for `mean_returns` and a single matrix for `return_cov`
/// are broadcast across all stages.
MarketSpec load_market_spec(std::istream& source,
                            const ValidationOptions& options = {});
MarketSpec load_market_spec_file(const std::filesystem::path& path,
                                 const ValidationOptions& options = {});
MarketSpec parse_market_spec(std::string_view text,
                             const ValidationOptions& options = {});

/// Per-stage (non-broadcast) JSON form, lossless for doubles.
std::string market_spec_to_json(const MarketSpec& spec);

/// Same moments at every stage.
MarketSpec stationary_market(int horizon, double riskless,
                             const Eigen::VectorXd& mean_returns,
                             const Eigen::MatrixXd& return_cov, double mu1,
                             double mu2, int initial_time = 0,
                             double initial_wealth = 1.0);

// Presets -------------------------------------------------------------------

/// Four periods, three risky assets, s = 1.04, mu1 = mu2 = 1.
inline constexpr std::string_view kExamplePreset = "li-duan-example-2";
/// Short alias of kExamplePreset.
inline constexpr std::string_view kExamplePresetAlias = "example-2";

bool is_preset(std::string_view name);
std::vector<std::string> preset_names();
MarketSpec preset_market(std::string_view name);
/// Raw JSON text of a preset, in the same format as market files.
std::string preset_json(std::string_view name);

// Excess moments -----------------------------------------------------------

struct ExcessMoments {
  std::vector<Eigen::VectorXd> mean_excess;    ///< E O_k
  std::vector<Eigen::MatrixXd> cov_excess;     ///< Cov(O_k) = Cov(e_k)
  std::vector<Eigen::MatrixXd> second_moment;  ///< E(O_k O_k^T)

  int horizon() const { return static_cast<int>(mean_excess.size()); }
  int num_assets() const {
    return mean_excess.empty() ? 0 : static_cast<int>(mean_excess[0].size());
  }
};

ExcessMoments derive_excess_moments(const MarketSpec& spec);

struct ExistenceReport {
  std::vector<bool> per_stage;
  std::vector<double> residual_norms;
  bool overall = false;
};

/// Per-stage test of E O_k in Ran(Cov(O_k)); `overall` covers stages >= t.
/// Stages before t are still evaluated and reported.
ExistenceReport check_open_loop_existence(
    const ExcessMoments& moments, int t,
    double tol = numerics::kDefaultRangeTol);

}  // namespace mveq
