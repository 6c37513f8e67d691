#include "mbsc/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mbsc/metrics.hpp"
#include "mbsc/random.hpp"

namespace mbsc {

MatrixXd exact_topk(const LaplacianProvider& l, Index k, const ExactOptions& options) {
  const MatrixXd* dense = l.dense();
  if (dense == nullptr) throw ContractViolation("exact_topk needs a materialized Laplacian");
  const Index n = l.size();
  if (n > options.max_n) {
    throw GuardExceeded("exact_topk: n = " + std::to_string(n) + " exceeds the guard of " +
                        std::to_string(options.max_n) +
                        " (a dense eigendecomposition costs O(n^3)); raise max_n to force it");
  }
  if (k < 1 || k > n) throw ContractViolation("exact_topk: k out of range");
  if (options.solver == ExactSolver::jacobi) return sym_eig_topk(*dense, k).vectors;

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(*dense);
  if (solver.info() != Eigen::Success) throw DegenerateRankError("exact_topk: eigensolver failed");
  // Ascending order from Eigen; take the last k reversed.
  MatrixXd out(n, k);
  for (Index c = 0; c < k; ++c) {
    VectorXd v = solver.eigenvectors().col(n - 1 - c);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    out.col(c) = v(arg) < 0 ? (-v).eval() : v;
  }
  return out;
}

PowerResult power_topk(const LaplacianProvider& l, const PowerParams& params) {
  const Index n = l.size();
  const Index k = params.k;
  if (params.q < 1) throw ContractViolation("power_topk: q must be at least 1");
  if (k < 1 || k > n) throw ContractViolation("power_topk: k out of range");

  CounterRng rng(stream_key(params.seed, 0x9043));
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd s(n, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) s(i, j) = gauss(rng);

  for (int round = 0; round < params.q; ++round) {
    s = l.full_matvec(s);
    // Without re-orthonormalization every column collapses onto the
    // dominant eigenvector.
    if (round + 1 < params.q) s = qr_orthonormal_factor(s);
  }

  PowerResult out;
  out.w = svd_tall(s).u;
  const auto un = static_cast<std::uint64_t>(n);
  const auto uk = static_cast<std::uint64_t>(k);
  const auto uq = static_cast<std::uint64_t>(params.q);
  out.flops = power_total_flops(un, uk, uq);
  out.orthonormalization_flops = power_orthonormalization_flops(un, uk, uq);
  return out;
}

NystromResult nystrom_embed(const Dataset& ds, const AffinityConfig& cfg, const NystromParams& params) {
  const Index n = ds.size();
  const Index m = params.m;
  const Index k = params.k;
  if (k < 1 || m < k || m > n) {
    throw ContractViolation("nystrom_embed: need 1 <= k <= m <= n (k = " + std::to_string(k) +
                            ", m = " + std::to_string(m) + ", n = " + std::to_string(n) + ")");
  }
  AffinityKernel kernel(ds.points, cfg);

  NystromResult out;
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  CounterRng rng(stream_key(params.seed, 0x4e75));
  std::shuffle(perm.begin(), perm.end(), rng);
  out.landmarks.assign(perm.begin(), perm.begin() + m);
  std::sort(out.landmarks.begin(), out.landmarks.end());

  // Cross block C (n x m, landmark rows included) and landmark block W (m x m)
  // of the kernel with unit self-affinity, so W is positive semidefinite.
  MatrixXd c(n, m);
  for (Index j = 0; j < m; ++j) {
    const Index lj = out.landmarks[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) c(i, j) = i == lj ? 1.0 : kernel(i, lj);
  }
  MatrixXd w(m, m);
  for (Index j = 0; j < m; ++j) w.row(j) = c.row(out.landmarks[static_cast<std::size_t>(j)]);

  // W^+ = U_r diag(1/lambda_r) U_r^T over the numerically nonzero spectrum.
  const auto eig = sym_eig(w);
  const double lmax = eig.values.cwiseAbs().maxCoeff();
  std::vector<Index> keep;
  for (Index i = 0; i < m; ++i) {
    if (std::abs(eig.values(i)) > 1e-10 * lmax * static_cast<double>(m)) keep.push_back(i);
  }
  const auto rank = static_cast<Index>(keep.size());
  if (rank < k) {
    throw DegenerateLandmarkError("nystrom_embed: landmark block has numerical rank " +
                                  std::to_string(rank) + " < k; use a larger m or another seed");
  }
  MatrixXd u(m, rank);
  VectorXd inv_lambda(rank);
  VectorXd signs(rank);
  for (Index r = 0; r < rank; ++r) {
    const Index src = keep[static_cast<std::size_t>(r)];
    u.col(r) = eig.vectors.col(src);
    inv_lambda(r) = 1.0 / eig.values(src);
    signs(r) = eig.values(src) > 0 ? 1.0 : -1.0;
  }

  // Degrees of the approximated affinity C W^+ C^T.
  const MatrixXd cu = c * u;  // n x r
  const VectorXd ct1 = c.transpose() * VectorXd::Ones(n);
  const VectorXd degree = cu * (inv_lambda.asDiagonal() * (u.transpose() * ct1));
  for (Index i = 0; i < n; ++i) {
    if (!(degree(i) > 0)) {
      throw DegenerateLandmarkError("nystrom_embed: approximate degree of sample " +
                                    std::to_string(i) + " is not positive; use a larger m");
    }
  }

  // L^ = F S F^T with F = D^-1/2 C U_r |Lambda_r|^-1/2, S = sign(Lambda_r).
  // Orthogonalize through F = Q R and diagonalize the small R S R^T.
  const VectorXd isd = degree.cwiseSqrt().cwiseInverse();
  const MatrixXd f = isd.asDiagonal() * cu * inv_lambda.cwiseAbs().cwiseSqrt().asDiagonal();
  MatrixXd q;
  try {
    q = qr_orthonormal_factor(f);
  } catch (const DegenerateRankError&) {
    throw DegenerateLandmarkError("nystrom_embed: extended eigenvectors are rank deficient");
  }
  const MatrixXd rfac = q.transpose() * f;
  MatrixXd small = rfac * signs.asDiagonal() * rfac.transpose();
  small = 0.5 * (small + small.transpose()).eval();
  const auto top = sym_eig_topk(small, k);
  out.w = q * top.vectors;
  out.flops = nystrom_flops(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(m));
  return out;
}

}  // namespace mbsc
