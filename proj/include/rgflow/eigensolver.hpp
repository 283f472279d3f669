#pragma once

#include "rgflow/linalg.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace rgflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EigenPairs {
  Vector values;    // ascending
  Matrix vectors;   // orthonormal columns
  Vector residuals; // |S v - mu v| per pair
  double norm_estimate = 0.0;
  int basis_size = 0;
};

/// Smallest `count` eigenpairs of a symmetric positive-semidefinite sparse
/// matrix. Small problems are solved densely; larger ones by block
/// shift-invert Krylov iteration around zero with full
/// reorthogonalization and Rayleigh–Ritz on S itself. A pair is accepted
/// when its residual is at most tol * |S|; otherwise ConvergenceError lists
/// the residual norms. The start block is fixed, so results are
/// deterministic. Each vector is signed so its first entry above 1e-12 in
/// magnitude is positive.
EigenPairs lowest_eigenpairs(const SparseMatrix& s, int count, double tol = 1e-10);

/// Groups indices of ascending eigenvalues whose relative gap is below tol.
std::vector<std::vector<int>> eigenvalue_clusters(const Vector& values, double tol = 1e-8);

}  // namespace rgflow
