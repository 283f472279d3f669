#include "rgflow/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace rgflow {

SymmetricEigen symmetric_eigen(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("symmetric eigendecomposition failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

double min_eigenvalue(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0);
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(m), Eigen::EigenvaluesOnly)
      .eigenvalues()(0);
}

double max_eigenvalue(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0);
  const auto ev =
      Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(m), Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1);
}

double spectral_radius(const Matrix& m) {
  return std::max(std::abs(min_eigenvalue(m)), std::abs(max_eigenvalue(m)));
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix psd_sqrt(const Matrix& m) {
  if (m.rows() == 1) return Matrix::Constant(1, 1, std::sqrt(std::max(m(0, 0), 0.0)));
  const auto eig = symmetric_eigen(m);
  Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

void require_spd(const Matrix& m, const std::string& what, double tol) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DomainError(what + " must be a non-empty square matrix");
  }
  if (!m.allFinite()) throw DomainError(what + " has non-finite entries");
  if (!is_symmetric(m, tol)) throw DomainError(what + " is not symmetric");
  const double lo = min_eigenvalue(m);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << what << " is not positive definite: smallest eigenvalue " << lo;
    throw DomainError(os.str());
  }
}

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  const auto cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw DomainError("matrix rows have unequal length");
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace rgflow
