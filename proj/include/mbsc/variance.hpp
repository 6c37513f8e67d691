#pragma once

#include <cstdint>
#include <vector>

#include "mbsc/graph.hpp"
#include "mbsc/linalg.hpp"
#include "mbsc/probes.hpp"

namespace mbsc {

/// Streaming first to fourth central moments per component (Welford-style
/// updates with Pebay's pairwise merge).
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Index dim = 0);

  void push(const VectorXd& x);
  void merge(const MomentAccumulator& other);

  std::uint64_t count() const { return count_; }
  const VectorXd& mean() const { return mean_; }
  VectorXd variance() const;            // unbiased sample variance
  VectorXd standard_error_mean() const;
  VectorXd standard_error_variance() const;

 private:
  std::uint64_t count_ = 0;
  VectorXd mean_, m2_, m3_, m4_;
};

/// Closed-form diagonal of cov(L r r^T w) for one probe, divided by n_r for
/// the mean of n_r iid probes:
/// diag[L w w^T L^T + (1/p - 3) L diag(diag(w w^T)) L^T + L L^T].
/// Requires ||w|| = 1.
VectorXd analytic_diag_cov(const MatrixXd& l, const VectorXd& w, double p, int n_r = 1);

/// diag[G G^T] + (1/p) diag[L L^T] with G = L w; valid when L >= 0.
VectorXd single_probe_bound(const MatrixXd& l, const VectorXd& w, double p);

/// (1/N_r) diag[G G^T] + n / (l N_r) diag[L L^T] with p = l / n.
VectorXd mini_batch_bound(const MatrixXd& l, const VectorXd& w, double p, int n_r);

struct DiagCovEstimate {
  VectorXd variance;
  VectorXd standard_error;
  std::uint64_t samples = 0;
};

/// Sample variance per component of the N_r-probe estimate (1/N_r) sum L r r^T w
/// over `samples` independent replications.
DiagCovEstimate empirical_diag_cov(const LaplacianProvider& l, const VectorXd& w,
                                   const ProbeConfig& probe, std::uint64_t samples);

struct VarianceReport {
  VectorXd empirical_diag_cov;
  VectorXd analytic_diag_cov;
  VectorXd standard_error;
  VectorXd bound_single_probe;
  VectorXd bound_mini_batch;
  double rel_error = 0.0;
  std::uint64_t samples = 0;
  double p = 1.0;
  int n_r = 1;
  std::uint64_t seed = 0;
  bool within_bound = true;  // empirical <= bound + 3 standard errors everywhere

  std::string to_json() const;
};

VarianceReport variance_report(const LaplacianProvider& l, const VectorXd& w,
                               const ProbeConfig& probe, std::uint64_t samples);

struct BatchSplit {
  Index l = 1;
  int n_r = 1;
};

struct SplitVariance {
  BatchSplit split;
  double p = 0.0;
  double empirical_total = 0.0;  // sum of componentwise variances of G~
  double standard_error = 0.0;
  double analytic_total = 0.0;
  double bound_total = 0.0;
};

struct AsymmetryReport {
  std::vector<SplitVariance> splits;  // in request order
  std::vector<std::size_t> order;     // indices into splits, ascending variance
};

/// Total variance of G~ for each (l, N_r) split of the same mini-batch size m.
AsymmetryReport asymmetry_experiment(const LaplacianProvider& l, const MatrixXd& w, Index m,
                                     const std::vector<BatchSplit>& splits,
                                     std::uint64_t replications = 20000, std::uint64_t seed = 0);

}  // namespace mbsc
