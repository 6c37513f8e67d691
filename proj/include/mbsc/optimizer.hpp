#pragma once

// Adaptive stochastic gradient ascent of Tr(W^T L W) on the Stiefel manifold:
// sparse-probe gradient estimates, tangent projection, Adagrad scaling and a
// QR retraction.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mbsc/graph.hpp"
#include "mbsc/linalg.hpp"
#include "mbsc/metrics.hpp"
#include "mbsc/probes.hpp"

namespace mbsc {

enum class GradientMode {
  stochastic,  // G ~ (1/N_r) sum_i L r_i r_i^T W
  exact,       // G = L W via full_matvec
};

enum class StopCriterion {
  subspace,   // sin of the largest principal angle between checkpoints
  frobenius,  // ||W_t - W_prev||_F
};

struct MbscParams {
  double lambda = 0.1;
  double epsilon = 1e-8;
  int max_iters = 1000;
  ProbeConfig probe;
  double stop_tol = 1e-4;
  int check_every = 10;
  GradientMode gradient = GradientMode::stochastic;
  StopCriterion criterion = StopCriterion::subspace;
  bool adagrad = true;          // false: plain Riemannian SGD with step lambda
  std::uint64_t init_seed = 0;  // seeds the Gaussian draw behind W^(0)

  void validate() const;
};

struct EmbeddingState {
  MatrixXd w;      // n x k, orthonormal columns
  MatrixXd m_acc;  // Adagrad accumulator, entrywise >= 0
  std::uint64_t t = 0;

  /// W^(0) = orthonormal factor of a seeded Gaussian n x k matrix, M = 0.
  static EmbeddingState random(Index n, Index k, std::uint64_t seed);
  static EmbeddingState from(MatrixXd w);
};

/// G~ = (1/N_r) sum_i L r_i r_i^T W with probe i of iteration t drawn from
/// stream probe_stream(t, i, N_r). Summation order is fixed.
MatrixXd stochastic_gradient(const LaplacianProvider& l, const ProbeConfig& probe,
                             const MatrixXd& w, std::uint64_t t);

/// (I - W W^T) G evaluated as G - W (W^T G).
MatrixXd project_tangent(const MatrixXd& w, const MatrixXd& g);

/// Stochastic Riemannian gradient H~ = (I - W W^T) G~.
MatrixXd htilde(const LaplacianProvider& l, const ProbeConfig& probe, const MatrixXd& w,
                std::uint64_t t);

/// Exact Riemannian gradient (I - W W^T) L W.
MatrixXd riemannian_gradient(const LaplacianProvider& l, const MatrixXd& w);

/// QR retraction R_W(v) = qf(W + v).
MatrixXd retract(const MatrixXd& w, const MatrixXd& v);

/// One iteration: M += H~^2, H^ = H~ / (eps + sqrt(M)), W <- qf(W + lambda H^).
EmbeddingState mbsc_step(const EmbeddingState& state, const LaplacianProvider& l,
                         const MbscParams& params);

/// Same step with a caller-supplied Riemannian gradient.
EmbeddingState mbsc_step_with_gradient(const EmbeddingState& state, const MatrixXd& h,
                                       const MbscParams& params);

struct TracePoint {
  std::uint64_t iter = 0;
  std::uint64_t flops = 0;
  double wall_ms = 0.0;
  double delta = 0.0;  // distance to the previous checkpoint
  std::optional<double> oracle_distance;
};

struct ConvergenceTrace {
  std::vector<TracePoint> points;
};

/// Writes iter,flops,wall_ms,delta_subspace[,oracle_subspace_dist].
void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace);

struct MbscRunOptions {
  std::optional<MatrixXd> oracle_basis;  // exact top-k basis for the trace
  std::optional<MatrixXd> initial_w;     // overrides the seeded W^(0)
  /// Called at every checkpoint with the current iterate.
  std::function<void(const TracePoint&, const MatrixXd&)> on_checkpoint;
  /// Called after every iteration.
  std::function<void(const EmbeddingState&)> on_step;
};

struct MbscResult {
  MatrixXd w;
  ConvergenceTrace trace;
  FlopLedger flops;
  std::uint64_t iterations = 0;
  bool converged = false;
};

/// Iterates mbsc_step until consecutive checkpoints are closer than stop_tol
/// (or t == max_iters).
MbscResult run_mbsc(const LaplacianProvider& l, Index k, const MbscParams& params,
                    const MbscRunOptions& options = {});

/// Tr(W^T L W).
double trace_objective(const LaplacianProvider& l, const MatrixXd& w);

}  // namespace mbsc
