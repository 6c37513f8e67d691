#pragma once

#include <cstdint>

#include "mbsc/data.hpp"
#include "mbsc/graph.hpp"
#include "mbsc/linalg.hpp"

namespace mbsc {

enum class ExactSolver {
  jacobi,     // sym_eig_topk
  tridiagonal // Eigen::SelfAdjointEigenSolver, for cross-checks past desk scale
};

struct ExactOptions {
  Index max_n = 5000;
  ExactSolver solver = ExactSolver::jacobi;
};

/// Top-k eigenvectors of the stored Laplacian.
MatrixXd exact_topk(const LaplacianProvider& l, Index k, const ExactOptions& options = {});

struct PowerParams {
  Index k = 1;
  int q = 2;
  std::uint64_t seed = 0;
};

struct PowerResult {
  MatrixXd w;
  std::uint64_t flops = 0;                  // n k + q (2n^2k - nk) + 2nk^2 + 2k^3
  std::uint64_t orthonormalization_flops = 0;  // reported separately
};

/// Subspace iteration from an n x k Gaussian start, with QR between rounds,
/// finished by the left factor of a tall SVD. Converges to the k eigenvalues
/// of largest magnitude.
PowerResult power_topk(const LaplacianProvider& l, const PowerParams& params);

struct NystromParams {
  Index m = 0;
  Index k = 1;
  std::uint64_t seed = 0;
};

struct NystromResult {
  MatrixXd w;
  std::uint64_t flops = 0;
  std::vector<Index> landmarks;
};

/// One-shot Nystrom approximation of the normalized Laplacian from m uniformly
/// sampled landmarks, with orthogonalized extended eigenvectors. The sampled
/// kernel keeps its unit diagonal, so at m = n the result is the spectrum of
/// the graph with self-loops.
NystromResult nystrom_embed(const Dataset& ds, const AffinityConfig& cfg, const NystromParams& params);

}  // namespace mbsc
