#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "mbsc/data.hpp"
#include "mbsc/linalg.hpp"

namespace mbsc {

enum class ExponentMode {
  distance,          // exp(-||xi - xj|| / sigma^2)
  squared_distance,  // exp(-||xi - xj||^2 / sigma^2)
};

std::string to_string(ExponentMode mode);
ExponentMode parse_exponent_mode(const std::string& text);

struct AffinityConfig {
  double sigma = 1.0;
  ExponentMode mode = ExponentMode::distance;
};

/// RBF affinity between samples, with a_ii = 0. The value for (i, j) is
/// bitwise identical to the value for (j, i).
class AffinityKernel {
 public:
  AffinityKernel(const MatrixXd& points, AffinityConfig cfg);

  Index size() const { return features_.cols(); }
  const AffinityConfig& config() const { return cfg_; }

  double operator()(Index i, Index j) const {
    if (i == j) return 0.0;
    const double* a = features_.col(i).data();
    const double* b = features_.col(j).data();
    double sq = 0.0;
    for (Index f = 0; f < features_.rows(); ++f) {
      const double diff = a[f] - b[f];
      sq += diff * diff;
    }
    const double arg = cfg_.mode == ExponentMode::distance ? std::sqrt(sq) : sq;
    return std::exp(-arg * inv_sigma_sq_);
  }

 private:
  MatrixXd features_;  // d x n, one sample per column
  AffinityConfig cfg_;
  double inv_sigma_sq_;
};

/// Degree vector d_i = sum_j a_ij, accumulated in ascending j for every i in
/// blocks of `block_columns` columns. O(n) memory.
VectorXd compute_degrees(const AffinityKernel& kernel, Index block_columns = 4096);

/// Column access to the normalized Laplacian L = D^{-1/2} A D^{-1/2}.
class LaplacianProvider {
 public:
  virtual ~LaplacianProvider() = default;

  Index size() const { return degree_.size(); }
  const VectorXd& degree() const { return degree_; }

  /// Columns of L at `idx`, in request order (repeats allowed).
  MatrixXd columns(std::span<const Index> idx) const;

  /// Writes column j of L into `out` (length n).
  virtual void column_into(Index j, Eigen::Ref<VectorXd> out) const = 0;

  /// out += alpha * L(:, j), elementwise in ascending row order.
  virtual void add_scaled_column(Index j, double alpha, Eigen::Ref<VectorXd> out) const = 0;

  /// Exact product L * w.
  virtual MatrixXd full_matvec(const MatrixXd& w) const = 0;

  /// Dense L when the provider stores it, nullptr otherwise.
  virtual const MatrixXd* dense() const { return nullptr; }

  /// Number of single-column reads served so far.
  std::uint64_t columns_read() const { return columns_read_.load(std::memory_order_relaxed); }

 protected:
  explicit LaplacianProvider(VectorXd degree) : degree_(std::move(degree)) {}
  void count_columns(std::uint64_t c) const { columns_read_.fetch_add(c, std::memory_order_relaxed); }
  void check_index(Index j) const;

 private:
  VectorXd degree_;
  mutable std::atomic<std::uint64_t> columns_read_{0};
};

class MaterializedLaplacian final : public LaplacianProvider {
 public:
  /// Wraps an arbitrary symmetric matrix. The degree vector is set to ones;
  /// useful for exercising the optimizer on synthetic operators.
  static std::unique_ptr<MaterializedLaplacian> from_matrix(MatrixXd l);

  MaterializedLaplacian(MatrixXd l, VectorXd degree);

  void column_into(Index j, Eigen::Ref<VectorXd> out) const override;
  void add_scaled_column(Index j, double alpha, Eigen::Ref<VectorXd> out) const override;
  MatrixXd full_matvec(const MatrixXd& w) const override;
  const MatrixXd* dense() const override { return &l_; }

  const MatrixXd& matrix() const { return l_; }

 private:
  MatrixXd l_;
};

/// Recomputes the requested columns of L on demand from the samples and the
/// precomputed degree vector; never allocates anything n x n.
class StreamingLaplacian final : public LaplacianProvider {
 public:
  StreamingLaplacian(AffinityKernel kernel, VectorXd degree);

  void column_into(Index j, Eigen::Ref<VectorXd> out) const override;
  void add_scaled_column(Index j, double alpha, Eigen::Ref<VectorXd> out) const override;
  MatrixXd full_matvec(const MatrixXd& w) const override;

  const AffinityKernel& kernel() const { return kernel_; }

 private:
  AffinityKernel kernel_;
  VectorXd inv_sqrt_degree_;
};

std::unique_ptr<MaterializedLaplacian> build_materialized(const Dataset& ds, const AffinityConfig& cfg);

/// `degree` may carry a cached degree vector (see read_degree_cache) to skip
/// the O(n^2) pass.
std::unique_ptr<StreamingLaplacian> build_streaming(const Dataset& ds, const AffinityConfig& cfg,
                                                    std::optional<VectorXd> degree = std::nullopt);

/// Degree cache file: 8-byte magic "MBSCDEG1", n as little-endian u64, then n
/// little-endian f64 values.
void write_degree_cache(const std::string& path, const VectorXd& degree);
VectorXd read_degree_cache(const std::string& path);

inline constexpr double kIsolatedDegree = 1e-300;

}  // namespace mbsc
