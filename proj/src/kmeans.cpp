#include "mbsc/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mbsc/random.hpp"

namespace mbsc {

namespace {

Index count_distinct_rows(const MatrixXd& x) {
  std::vector<Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Index(0));
  auto row_less = [&](Index a, Index b) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  Index distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (row_less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

double sq_dist(const MatrixXd& x, Index i, const MatrixXd& centers, Index c) {
  return (x.row(i) - centers.row(c)).squaredNorm();
}

// Nearest centroid per row, ties to the lowest index.
std::vector<int> assign(const MatrixXd& x, const MatrixXd& centers) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d = sq_dist(x, i, centers, c);
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
  }
  return labels;
}

double inertia_of(const MatrixXd& x, const MatrixXd& centers, const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) total += sq_dist(x, i, centers, labels[static_cast<std::size_t>(i)]);
  return total;
}

MatrixXd seed_plus_plus(const MatrixXd& x, int k, CounterRng& rng) {
  const Index n = x.rows();
  MatrixXd centers(k, x.cols());
  const auto first = static_cast<Index>(rng.uniform() * static_cast<double>(n));
  centers.row(0) = x.row(std::min(first, n - 1));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = sq_dist(x, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = n - 1;
    if (total > 0) {
      double target = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0 && d2(i) > 0) {
          pick = i;
          break;
        }
      }
      // Rounding can exhaust the loop; fall back to the last positive weight.
      if (target >= 0) {
        for (Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0) {
            pick = i;
            break;
          }
        }
      }
    }
    centers.row(c) = x.row(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(x, i, centers, c));
  }
  return centers;
}

struct RestartResult {
  std::vector<int> labels;
  MatrixXd centers;
  double inertia;
  std::vector<double> history;
};

RestartResult lloyd(const MatrixXd& x, MatrixXd centers, int max_iters) {
  const Index k = centers.rows();
  RestartResult out;
  std::vector<int> labels = assign(x, centers);
  for (int it = 0; it < max_iters; ++it) {
    out.history.push_back(inertia_of(x, centers, labels));

    MatrixXd sums = MatrixXd::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < x.rows(); ++i) {
      const int c = labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: reseed at the point farthest from its own centroid.
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < x.rows(); ++i) {
        const double d = sq_dist(x, i, centers, labels[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(c) = x.row(far);
      labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
    }

    std::vector<int> next = assign(x, centers);
    if (next == labels) break;
    labels = std::move(next);
  }
  out.inertia = inertia_of(x, centers, labels);
  out.history.push_back(out.inertia);
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  return out;
}

}  // namespace

KmeansResult kmeans(const MatrixXd& points, const KmeansParams& params) {
  if (params.k < 1) throw ContractViolation("kmeans: k must be positive");
  if (params.restarts < 1) throw ContractViolation("kmeans: restarts must be positive");
  if (points.rows() < params.k) throw ContractViolation("kmeans: fewer points than clusters");

  MatrixXd x = points;
  if (params.row_normalize) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double norm = x.row(i).norm();
      if (norm > 0) x.row(i) /= norm;
    }
  }
  if (count_distinct_rows(x) < params.k) {
    throw DuplicateCentroidError("kmeans: fewer distinct points than k = " + std::to_string(params.k));
  }

  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < params.restarts; ++r) {
    CounterRng rng(stream_key(params.seed, 0x4b4d, static_cast<std::uint64_t>(r)));
    auto run = lloyd(x, seed_plus_plus(x, params.k, rng), params.max_lloyd_iters);
    if (run.inertia < best.inertia) {
      best.inertia = run.inertia;
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centers);
      best.inertia_history = std::move(run.history);
      best.winning_restart = r;
    }
  }
  return best;
}

}  // namespace mbsc
