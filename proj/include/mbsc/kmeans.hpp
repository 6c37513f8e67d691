#pragma once

#include <cstdint>
#include <vector>

#include "mbsc/linalg.hpp"

namespace mbsc {

struct KmeansParams {
  int k = 2;
  int restarts = 10;
  int max_lloyd_iters = 300;
  std::uint64_t seed = 0;
  bool row_normalize = false;  // scale rows to unit norm first (zero rows untouched)
};

struct KmeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
  MatrixXd centroids;                   // k x d
  std::vector<double> inertia_history;  // winning restart, one entry per Lloyd pass
  int winning_restart = 0;
};

/// k-means++ seeding followed by Lloyd iterations, best of `restarts` by
/// inertia (ties go to the lowest restart index). Rows of `points` are samples.
KmeansResult kmeans(const MatrixXd& points, const KmeansParams& params);

}  // namespace mbsc
