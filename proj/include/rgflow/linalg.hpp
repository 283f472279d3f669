#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rgflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when an input violates an operation's precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure fails to reach its accuracy target.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric eigendecomposition, eigenvalues ascending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen symmetric_eigen(const Matrix& m);

double min_eigenvalue(const Matrix& m);
double max_eigenvalue(const Matrix& m);

/// Largest |eigenvalue|; the spectral radius of a symmetric matrix.
double spectral_radius(const Matrix& m);

Matrix symmetrize(const Matrix& m);

/// Positive semidefinite square root; eigenvalues clamped at zero first.
Matrix psd_sqrt(const Matrix& m);

/// Throws DomainError unless `m` is square, symmetric to `tol` (relative), and
/// has smallest eigenvalue > 0. The message names `what` and the offending
/// eigenvalue.
void require_spd(const Matrix& m, const std::string& what, double tol = 1e-12);

bool is_symmetric(const Matrix& m, double tol = 1e-12);

/// Matrix from nested row lists; rows must be equal length.
Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows);

}  // namespace rgflow
