#include "mbsc/optimizer.hpp"

#include <chrono>
#include <ostream>
#include <random>

#include "mbsc/random.hpp"

namespace mbsc {

void MbscParams::validate() const {
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be positive");
  if (!(stop_tol >= 0)) throw ConfigError("stop_tol must be nonnegative");
  if (check_every < 1) throw ConfigError("check_every must be positive");
  if (gradient == GradientMode::stochastic) probe.validate();
}

EmbeddingState EmbeddingState::random(Index n, Index k, std::uint64_t seed) {
  if (k < 1 || k > n) throw ContractViolation("random embedding needs 1 <= k <= n");
  CounterRng rng(stream_key(seed, 0x1417));
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd g(n, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = gauss(rng);
  return from(qr_orthonormal_factor(g));
}

EmbeddingState EmbeddingState::from(MatrixXd w) {
  EmbeddingState s;
  s.m_acc = MatrixXd::Zero(w.rows(), w.cols());
  s.w = std::move(w);
  return s;
}

MatrixXd stochastic_gradient(const LaplacianProvider& l, const ProbeConfig& probe,
                             const MatrixXd& w, std::uint64_t t) {
  MatrixXd g = MatrixXd::Zero(w.rows(), w.cols());
  const auto n_r = static_cast<std::uint64_t>(probe.n_r);
  for (std::uint64_t i = 0; i < n_r; ++i) {
    const SparseProbe r = draw_probe(probe, probe_stream(t, i, n_r));
    g += probe_product(l, r, w);
  }
  g /= static_cast<double>(probe.n_r);
  return g;
}

MatrixXd project_tangent(const MatrixXd& w, const MatrixXd& g) {
  const MatrixXd wtg = w.transpose() * g;
  MatrixXd h = g;
  h.noalias() -= w * wtg;
  return h;
}

MatrixXd htilde(const LaplacianProvider& l, const ProbeConfig& probe, const MatrixXd& w,
                std::uint64_t t) {
  return project_tangent(w, stochastic_gradient(l, probe, w, t));
}

MatrixXd riemannian_gradient(const LaplacianProvider& l, const MatrixXd& w) {
  return project_tangent(w, l.full_matvec(w));
}

MatrixXd retract(const MatrixXd& w, const MatrixXd& v) {
  return qr_orthonormal_factor(w + v);
}

EmbeddingState mbsc_step_with_gradient(const EmbeddingState& state, const MatrixXd& h,
                                       const MbscParams& params) {
  EmbeddingState next;
  next.t = state.t + 1;
  MatrixXd step;
  if (params.adagrad) {
    next.m_acc = state.m_acc + h.cwiseAbs2();
    step = h.array() / (params.epsilon + next.m_acc.array().sqrt());
  } else {
    next.m_acc = state.m_acc;
    step = h;
  }
  try {
    next.w = retract(state.w, params.lambda * step);
  } catch (const DegenerateRankError& e) {
    throw StepFailure("retraction lost rank at iteration " + std::to_string(next.t) +
                      "; try a smaller lambda (" + e.what() + ")");
  }
  return next;
}

EmbeddingState mbsc_step(const EmbeddingState& state, const LaplacianProvider& l,
                         const MbscParams& params) {
  const MatrixXd h = params.gradient == GradientMode::exact
                         ? riemannian_gradient(l, state.w)
                         : htilde(l, params.probe, state.w, state.t);
  return mbsc_step_with_gradient(state, h, params);
}

void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace) {
  const bool oracle = !trace.points.empty() && trace.points.front().oracle_distance.has_value();
  out << "iter,flops,wall_ms,delta_subspace" << (oracle ? ",oracle_subspace_dist" : "") << '\n';
  out.precision(17);
  for (const auto& p : trace.points) {
    out << p.iter << ',' << p.flops << ',' << p.wall_ms << ',' << p.delta;
    if (oracle) out << ',' << p.oracle_distance.value_or(-1.0);
    out << '\n';
  }
}

MbscResult run_mbsc(const LaplacianProvider& l, Index k, const MbscParams& params,
                    const MbscRunOptions& options) {
  params.validate();
  const Index n = l.size();
  if (k < 1 || k >= n) throw ContractViolation("run_mbsc: need 1 <= k < n");
  if (params.gradient == GradientMode::stochastic && params.probe.n != n) {
    throw ContractViolation("run_mbsc: probe config n does not match the Laplacian");
  }
  if (options.oracle_basis && (options.oracle_basis->rows() != n || options.oracle_basis->cols() != k)) {
    throw ContractViolation("run_mbsc: oracle basis has the wrong shape");
  }

  const auto start = std::chrono::steady_clock::now();
  EmbeddingState state = options.initial_w ? EmbeddingState::from(*options.initial_w)
                                           : EmbeddingState::random(n, k, params.init_seed);
  if (state.w.rows() != n || state.w.cols() != k) {
    throw ContractViolation("run_mbsc: initial W has the wrong shape");
  }

  const auto m = static_cast<std::uint64_t>(
      params.gradient == GradientMode::exact ? n : params.probe.batch_size());
  const FlopLedger per_iter =
      mbsc_iter_ledger(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k), m);

  MbscResult result;
  MatrixXd previous = state.w;
  const auto max_iters = static_cast<std::uint64_t>(params.max_iters);
  while (state.t < max_iters) {
    state = mbsc_step(state, l, params);
    result.flops += per_iter;
    if (options.on_step) options.on_step(state);

    const bool checkpoint = state.t % static_cast<std::uint64_t>(params.check_every) == 0 ||
                            state.t == max_iters;
    if (!checkpoint) continue;

    TracePoint point;
    point.iter = state.t;
    point.flops = result.flops.total();
    point.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    point.delta = subspace_distance(previous, state.w);
    if (options.oracle_basis) point.oracle_distance = subspace_distance(*options.oracle_basis, state.w);
    result.trace.points.push_back(point);
    if (options.on_checkpoint) options.on_checkpoint(point, state.w);

    const double change =
        params.criterion == StopCriterion::subspace ? point.delta : (state.w - previous).norm();
    previous = state.w;
    if (change < params.stop_tol) {
      result.converged = true;
      break;
    }
  }
  result.iterations = state.t;
  result.w = std::move(state.w);
  return result;
}

double trace_objective(const LaplacianProvider& l, const MatrixXd& w) {
  return (w.transpose() * l.full_matvec(w)).trace();
}

}  // namespace mbsc
