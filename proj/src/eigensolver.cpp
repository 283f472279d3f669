#include "rgflow/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <sstream>

namespace rgflow {
namespace {

constexpr Eigen::Index kDenseLimit = 600;

double abs_row_sum_norm(const SparseMatrix& s) {
  Vector sums = Vector::Zero(s.rows());
  for (int k = 0; k < s.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(s, k); it; ++it) sums(it.row()) += std::abs(it.value());
  }
  return sums.size() ? sums.maxCoeff() : 0.0;
}

void fix_signs(Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > 1e-12) {
        if (v(i, j) < 0.0) v.col(j) *= -1.0;
        break;
      }
    }
  }
}

// Orthogonalizes the columns of w against q (twice) and among themselves;
// returns the surviving, normalized columns.
Matrix orthogonalize(const Matrix& q, Matrix w) {
  Matrix out(w.rows(), 0);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    Vector v = w.col(j);
    const double before = v.norm();
    if (before == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (q.cols()) v -= q * (q.transpose() * v);
      if (out.cols()) v -= out * (out.transpose() * v);
    }
    const double after = v.norm();
    if (after <= 1e-10 * before) continue;
    out.conservativeResize(Eigen::NoChange, out.cols() + 1);
    out.col(out.cols() - 1) = v / after;
  }
  return out;
}

EigenPairs dense_solve(const SparseMatrix& s, int count, double norm) {
  const Matrix dense = Matrix(s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");
  EigenPairs out;
  out.values = es.eigenvalues().head(count);
  out.vectors = es.eigenvectors().leftCols(count);
  out.norm_estimate = norm;
  out.basis_size = static_cast<int>(dense.rows());
  return out;
}

}  // namespace

EigenPairs lowest_eigenpairs(const SparseMatrix& s, int count, double tol) {
  const auto n = s.rows();
  if (s.cols() != n) throw DomainError("eigensolver needs a square matrix");
  if (count < 1 || count >= n) throw DomainError("eigensolver: requested count must be in [1, n)");
  const double norm = abs_row_sum_norm(s);
  EigenPairs out;
  if (n <= kDenseLimit) {
    out = dense_solve(s, count, norm);
  } else {
    SparseMatrix shifted = s;
    const double shift = 1e-8 * std::max(norm, 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed");

    const int block = std::min(count + 1, 6);
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal;
    Matrix start(n, block);
    for (Eigen::Index j = 0; j < block; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) start(i, j) = normal(rng);
    }
    Matrix q = orthogonalize(Matrix(n, 0), start);
    Matrix sq = s * q;
    Matrix last = q;
    const Eigen::Index max_basis = std::min<Eigen::Index>(n, 40 * block + 400);
    bool converged = false;
    while (true) {
      if (q.cols() >= count) {
        const Matrix h = symmetrize(q.transpose() * sq);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        const Matrix y = es.eigenvectors().leftCols(count);
        out.values = es.eigenvalues().head(count);
        out.vectors = q * y;
        const Matrix r = sq * y - out.vectors * out.values.asDiagonal();
        out.residuals = r.colwise().norm().transpose();
        if (out.residuals.maxCoeff() <= tol * norm) {
          converged = true;
          break;
        }
      }
      if (q.cols() >= max_basis) break;
      Matrix w(n, last.cols());
      for (Eigen::Index j = 0; j < last.cols(); ++j) w.col(j) = ldlt.solve(last.col(j));
      Matrix fresh = orthogonalize(q, w);
      if (fresh.cols() == 0) {
        // Invariant subspace reached: continue from fresh random directions.
        Matrix again(n, block);
        for (Eigen::Index j = 0; j < block; ++j) {
          for (Eigen::Index i = 0; i < n; ++i) again(i, j) = normal(rng);
        }
        fresh = orthogonalize(q, again);
        if (fresh.cols() == 0) break;
      }
      const Matrix sfresh = s * fresh;
      q.conservativeResize(Eigen::NoChange, q.cols() + fresh.cols());
      q.rightCols(fresh.cols()) = fresh;
      sq.conservativeResize(Eigen::NoChange, sq.cols() + fresh.cols());
      sq.rightCols(fresh.cols()) = sfresh;
      last = fresh;
    }
    if (!converged) {
      std::ostringstream os;
      os << "eigensolver did not converge (basis " << q.cols() << "); residual norms:";
      for (Eigen::Index i = 0; i < out.residuals.size(); ++i) os << ' ' << out.residuals(i);
      os << " against tolerance " << tol * norm;
      throw ConvergenceError(os.str());
    }
    out.norm_estimate = norm;
    out.basis_size = static_cast<int>(q.cols());
  }
  fix_signs(out.vectors);
  out.residuals = (s * out.vectors - out.vectors * out.values.asDiagonal()).colwise().norm().transpose();
  if (out.residuals.maxCoeff() > tol * std::max(norm, 1e-300)) {
    std::ostringstream os;
    os << "eigensolver residuals above tolerance:";
    for (Eigen::Index i = 0; i < out.residuals.size(); ++i) os << ' ' << out.residuals(i);
    throw ConvergenceError(os.str());
  }
  return out;
}

std::vector<std::vector<int>> eigenvalue_clusters(const Vector& values, double tol) {
  std::vector<std::vector<int>> out;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!out.empty()) {
      const double prev = values(out.back().back());
      if (std::abs(values(i) - prev) <= tol * std::max(std::abs(prev), 1e-12)) {
        out.back().push_back(static_cast<int>(i));
        continue;
      }
    }
    out.push_back({static_cast<int>(i)});
  }
  return out;
}

}  // namespace rgflow
