#include "mveq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

namespace mveq::numerics {

namespace {

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(
    const Eigen::MatrixXd& m, bool want_vectors) {
  if (m.rows() != m.cols()) {
    throw NumericsError(
        fmt::format("expected a square matrix, got {}x{}", m.rows(), m.cols()));
  }
  if (!all_finite(m)) {
    throw NumericsError("matrix has non-finite entries");
  }
  if (!is_symmetric(m)) {
    throw NumericsError(fmt::format(
        "matrix is not symmetric (asymmetry {:.3e})",
        max_abs(m - m.transpose())));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericsError("symmetric eigendecomposition did not converge");
  }
  return solver;
}

}  // namespace

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.transpose()) <= tol * std::max(1.0, max_abs(m));
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

PinvResult pseudoinverse(const Eigen::MatrixXd& m, double rel_tol) {
  if (!(rel_tol > 0.0)) {
    throw std::invalid_argument("pseudoinverse tolerance must be positive");
  }
  PinvResult out;
  const auto n = m.rows();
  out.pinv = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return out;

  const auto solver = decompose(m, true);
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  const double sigma_max = lambda.cwiseAbs().maxCoeff();
  out.cutoff = rel_tol * sigma_max;

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lambda[i]) > out.cutoff) {
      inv[i] = 1.0 / lambda[i];
      ++out.rank;
    }
  }
  out.pinv = vecs * inv.asDiagonal() * vecs.transpose();
  // Rounding in the product leaves O(eps) asymmetry; remove it.
  out.pinv = symmetrize(out.pinv);
  return out;
}

double scalar_dagger(double a, double abs_tol) {
  return std::abs(a) > abs_tol ? 1.0 / a : 0.0;
}

RangeMembership range_membership(const Eigen::VectorXd& v,
                                 const Eigen::MatrixXd& m, double rel_tol,
                                 double pinv_tol) {
  if (v.size() != m.rows()) {
    throw NumericsError(fmt::format("dimension mismatch: vector {} vs matrix {}",
                                    v.size(), m.rows()));
  }
  const PinvResult p = pseudoinverse(m, pinv_tol);
  RangeMembership out;
  out.residual = (m * (p.pinv * v) - v).norm();
  out.member = out.residual <= rel_tol * std::max(1.0, v.norm());
  return out;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return Eigen::VectorXd();
  return decompose(m, false).eigenvalues();
}

bool is_psd(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() == 0) return true;
  const Eigen::VectorXd lambda = symmetric_eigenvalues(m);
  return lambda.minCoeff() >= -tol * std::max(1.0, lambda.maxCoeff());
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m, double rel_tol) {
  const auto n = m.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const auto solver = decompose(m, true);
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double cutoff = rel_tol * std::max(lmax, 0.0);

  // Largest eigenvalues first so that factor columns are ordered by weight.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (lambda[i] > cutoff && lambda[i] > 0.0) keep.push_back(i);
  }
  Eigen::MatrixXd f(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    f.col(static_cast<Eigen::Index>(j)) =
        solver.eigenvectors().col(keep[j]) * std::sqrt(lambda[keep[j]]);
  }
  return f;
}

}  // namespace mveq::numerics
