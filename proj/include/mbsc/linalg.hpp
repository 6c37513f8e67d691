#pragma once

// Dense kernels used by the optimizer and the baselines. Everything here is a
// free function over Eigen expressions, templated on the scalar type, and
// deterministic for a fixed input (no reductions whose order depends on
// threading).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mbsc/error.hpp"

namespace mbsc {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Index = Eigen::Index;

/// Tolerances used by the linalg contracts. Defaults are the module constants;
/// tests may pass tighter or looser values.
struct LinalgTolerances {
  double rank = 1e-12;          // |R_ii| < rank * ||m||_F  => degenerate
  double symmetry = 1e-10;      // max |m - m^T| allowed by sym_eig_topk
  double orthonormality = 1e-8; // ||a^T a - I||_F allowed by subspace_distance
  int max_jacobi_sweeps = 100;
};

inline constexpr LinalgTolerances kDefaultTolerances{};

template <typename Scalar>
struct SymEigResult {
  Vector<Scalar> values;   // descending
  Matrix<Scalar> vectors;  // columns, orthonormal
};

template <typename Scalar>
struct SvdResult {
  Matrix<Scalar> u;
  Vector<Scalar> s;  // descending, nonnegative
  Matrix<Scalar> vt;
};

/// ||a^T a - I||_F.
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> gram = a.transpose() * a;
  return (gram - Matrix<Scalar>::Identity(gram.rows(), gram.cols())).norm();
}

/// Orthonormal factor Q of a Householder QR of the tall matrix m, with the
/// sign convention R_ii >= 0 so that the factor is unique.
template <typename Derived>
Matrix<typename Derived::Scalar> qr_orthonormal_factor(
    const Eigen::MatrixBase<Derived>& m,
    const LinalgTolerances& tol = kDefaultTolerances) {
  using Scalar = typename Derived::Scalar;
  const Index n = m.rows();
  const Index k = m.cols();
  if (n < k) {
    throw ContractViolation("qr_orthonormal_factor: need rows >= cols, got " +
                            std::to_string(n) + "x" + std::to_string(k));
  }
  Matrix<Scalar> a = m;
  const Scalar scale = a.norm();
  if (k == 0) return a;
  if (!(scale > Scalar(0))) {
    throw DegenerateRankError("qr_orthonormal_factor: zero matrix");
  }

  // Reflectors are stored below the diagonal of `a`, leading entry in betas.
  Vector<Scalar> r_diag(k);
  Vector<Scalar> heads(k);
  for (Index j = 0; j < k; ++j) {
    auto x = a.col(j).tail(n - j);
    const Scalar norm_x = x.norm();
    const Scalar alpha = x(0) > 0 ? -norm_x : norm_x;
    r_diag(j) = alpha;
    if (std::abs(alpha) < Scalar(tol.rank) * scale) {
      throw DegenerateRankError(
          "qr_orthonormal_factor: column " + std::to_string(j) +
          " is numerically dependent (|R_jj| = " + std::to_string(double(std::abs(alpha))) + ")");
    }
    // v = x - alpha e1, normalized to unit length.
    x(0) -= alpha;
    const Scalar vnorm = x.norm();
    x /= vnorm;
    heads(j) = x(0);
    if (j + 1 < k) {
      auto trailing = a.block(j, j + 1, n - j, k - j - 1);
      const Matrix<Scalar> proj = x.transpose() * trailing;
      trailing.noalias() -= Scalar(2) * x * proj;
    }
  }

  // Q = H_0 H_1 ... H_{k-1} [I; 0], accumulated backwards.
  Matrix<Scalar> q = Matrix<Scalar>::Identity(n, k);
  for (Index j = k - 1; j >= 0; --j) {
    const auto v = a.col(j).tail(n - j);
    auto block = q.block(j, j, n - j, k - j);
    const Matrix<Scalar> proj = v.transpose() * block;
    block.noalias() -= Scalar(2) * v * proj;
  }
  for (Index j = 0; j < k; ++j) {
    if (r_diag(j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
/// Eigenvalues are sorted descending; every eigenvector is signed so that its
/// largest-magnitude component is positive.
template <typename Derived>
SymEigResult<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& m,
                                               const LinalgTolerances& tol = kDefaultTolerances) {
  using Scalar = typename Derived::Scalar;
  const Index n = m.rows();
  if (m.cols() != n) throw ContractViolation("sym_eig: matrix is not square");
  Matrix<Scalar> a = m;
  const Scalar max_abs = n > 0 ? a.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar asym = n > 0 ? (a - a.transpose()).cwiseAbs().maxCoeff() : Scalar(0);
  if (asym > Scalar(tol.symmetry) * std::max(Scalar(1), max_abs)) {
    throw ContractViolation("sym_eig: matrix is not symmetric (max |m - m^T| = " +
                            std::to_string(double(asym)) + ")");
  }
  a = (a + a.transpose()).eval() * Scalar(0.5);

  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar frob = a.norm();
  for (int sweep = 0; sweep < tol.max_jacobi_sweeps; ++sweep) {
    Scalar off = 0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(Scalar(2) * off) <= eps * frob) break;
    for (Index q = 1; q < n; ++q) {
      for (Index p = 0; p < q; ++p) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Skip rotations that cannot change the diagonal in finite precision.
        if (std::abs(apq) <= eps * eps * (std::abs(a(p, p)) + std::abs(a(q, q)))) {
          a(p, q) = a(q, p) = 0;
          continue;
        }
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheRight(p, q, rot);
        a.applyOnTheLeft(p, q, rot.adjoint());
        v.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = 0;
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });

  SymEigResult<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index c = 0; c < n; ++c) {
    const Index src = order[static_cast<std::size_t>(c)];
    out.values(c) = a(src, src);
    auto col = v.col(src);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    out.vectors.col(c) = col(arg) < 0 ? (-col).eval() : col.eval();
  }
  return out;
}

/// Top-k eigenpairs (largest algebraic eigenvalues) of a symmetric matrix.
template <typename Derived>
SymEigResult<typename Derived::Scalar> sym_eig_topk(const Eigen::MatrixBase<Derived>& m, Index k,
                                                    const LinalgTolerances& tol = kDefaultTolerances) {
  if (k < 0 || k > m.rows()) {
    throw ContractViolation("sym_eig_topk: k = " + std::to_string(k) + " out of range for n = " +
                            std::to_string(m.rows()));
  }
  auto full = sym_eig(m, tol);
  full.values.conservativeResize(k);
  full.vectors.conservativeResize(Eigen::NoChange, k);
  return full;
}

/// Thin SVD of a tall matrix: QR of m, then the symmetric eigenproblem of the
/// small triangular factor R R^T.
template <typename Derived>
SvdResult<typename Derived::Scalar> svd_tall(const Eigen::MatrixBase<Derived>& m,
                                             const LinalgTolerances& tol = kDefaultTolerances) {
  using Scalar = typename Derived::Scalar;
  const Index k = m.cols();
  if (m.rows() < k) throw ContractViolation("svd_tall: need rows >= cols");
  const Matrix<Scalar> q = qr_orthonormal_factor(m, tol);
  const Matrix<Scalar> r = q.transpose() * m;  // k x k, upper triangular up to rounding
  const Matrix<Scalar> rrt = r * r.transpose();
  const auto eig = sym_eig(rrt, tol);

  SvdResult<Scalar> out;
  out.s = eig.values.cwiseMax(Scalar(0)).cwiseSqrt();
  const Scalar smax = k > 0 ? out.s(0) : Scalar(0);
  out.vt.resize(k, k);
  for (Index i = 0; i < k; ++i) {
    if (!(out.s(i) > Scalar(tol.rank) * smax)) {
      throw DegenerateRankError("svd_tall: singular value " + std::to_string(i) + " vanished");
    }
    out.vt.row(i) = (eig.vectors.col(i).transpose() * r) / out.s(i);
  }
  out.u = q * eig.vectors;
  return out;
}

/// Sine of the largest principal angle between span(a) and span(b), i.e.
/// ||(I - a a^T) b||_2. The projector is never formed.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar subspace_distance(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b,
                                            const LinalgTolerances& tol = kDefaultTolerances) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation("subspace_distance: shape mismatch");
  }
  if (orthonormality_error(a) > Scalar(tol.orthonormality) ||
      orthonormality_error(b) > Scalar(tol.orthonormality)) {
    throw ContractViolation("subspace_distance: inputs must have orthonormal columns");
  }
  if (a.cols() == 0) return Scalar(0);
  const Matrix<Scalar> residual = b - a * (a.transpose() * b);
  const Matrix<Scalar> gram = residual.transpose() * residual;
  const auto eig = sym_eig(gram, tol);
  return std::clamp(std::sqrt(std::max(Scalar(0), eig.values(0))), Scalar(0), Scalar(1));
}

}  // namespace mbsc
