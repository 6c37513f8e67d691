#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mbsc/data.hpp"
#include "mbsc/graph.hpp"
#include "mbsc/linalg.hpp"
#include "mbsc/random.hpp"

namespace mbsc::testing {

inline MatrixXd gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  CounterRng rng(stream_key(seed, 0x7e57));
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  return m;
}

inline MatrixXd random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  return qr_orthonormal_factor(gaussian_matrix(rows, cols, seed));
}

inline MatrixXd random_symmetric(Index n, std::uint64_t seed) {
  const MatrixXd g = gaussian_matrix(n, n, seed);
  return 0.5 * (g + g.transpose());
}

/// Q diag(top, tail) Q^T with Q Haar-like orthogonal and the tail drawn
/// uniformly from [-tail_width, tail_width].
inline MatrixXd planted_spectrum(Index n, const std::vector<double>& top, double tail_width,
                                 std::uint64_t seed) {
  const MatrixXd q = random_orthonormal(n, n, seed);
  CounterRng rng(stream_key(seed, 0x5bec));
  VectorXd values(n);
  for (Index i = 0; i < n; ++i) {
    values(i) = i < static_cast<Index>(top.size()) ? top[static_cast<std::size_t>(i)]
                                                  : tail_width * (2.0 * rng.uniform() - 1.0);
  }
  MatrixXd l = q * values.asDiagonal() * q.transpose();
  return 0.5 * (l + l.transpose());
}

inline Dataset gaussian_cloud(Index n, Index d, std::uint64_t seed) {
  Dataset ds;
  ds.name = "cloud";
  ds.points = gaussian_matrix(n, d, seed);
  return ds;
}

/// Normalized Laplacian of a Gaussian point cloud under the squared-distance
/// kernel at the median bandwidth: nonnegative, symmetric, spectrum in [-1, 1].
inline std::unique_ptr<MaterializedLaplacian> cloud_laplacian(Index n, std::uint64_t seed) {
  const Dataset ds = gaussian_cloud(n, 2, seed);
  return build_materialized(ds, {median_sigma(ds, n, seed), ExponentMode::squared_distance});
}

}  // namespace mbsc::testing
