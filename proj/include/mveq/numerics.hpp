#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mveq {

/// Raised when a decomposition cannot be carried out (non-finite entries,
/// asymmetric input where symmetry is required).
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace numerics {

inline constexpr double kDefaultPinvTol = 1e-10;
inline constexpr double kDefaultDaggerTol = 1e-12;
inline constexpr double kDefaultRangeTol = 1e-8;
inline constexpr double kDefaultPsdTol = 1e-10;
/// Relative asymmetry accepted by the symmetric-only routines below.
inline constexpr double kSymmetryTol = 1e-9;

struct PinvResult {
  Eigen::MatrixXd pinv;
  int rank = 0;
  /// Eigenvalue magnitude at or below which a direction counts as null.
  double cutoff = 0.0;
};

struct RangeMembership {
  bool member = false;
  double residual = 0.0;
};

bool all_finite(const Eigen::MatrixXd& m);

/// True if ||M - M^T||_max <= tol * max(1, ||M||_max).
bool is_symmetric(const Eigen::MatrixXd& m, double tol = kSymmetryTol);

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m);

/// Moore-Penrose pseudoinverse of a symmetric matrix through its spectral
/// decomposition. Eigenvalues with |lambda| <= rel_tol * max|lambda| are
/// treated as zero, so the result is exactly symmetric and rank-revealing.
///
/// Throws NumericsError on non-finite input or asymmetry beyond kSymmetryTol.
PinvResult pseudoinverse(const Eigen::MatrixXd& m,
                         double rel_tol = kDefaultPinvTol);

/// a^dagger: 1/a when |a| > abs_tol, otherwise 0.
double scalar_dagger(double a, double abs_tol = kDefaultDaggerTol);

/// Tests v in Ran(M) via the residual ||M M^dagger v - v||, accepted when it is
/// at most rel_tol * max(1, ||v||).
RangeMembership range_membership(const Eigen::VectorXd& v,
                                 const Eigen::MatrixXd& m,
                                 double rel_tol = kDefaultRangeTol,
                                 double pinv_tol = kDefaultPinvTol);

/// lambda_min(M) >= -tol * max(1, lambda_max(M)).
bool is_psd(const Eigen::MatrixXd& m, double tol = kDefaultPsdTol);

/// Ascending eigenvalues of a symmetric matrix.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m);

/// F with F F^T = M for symmetric PSD M, keeping only the columns whose
/// eigenvalue exceeds rel_tol * lambda_max (so F has numerical-rank columns).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m,
                           double rel_tol = kDefaultPinvTol);

}  // namespace numerics
}  // namespace mveq
