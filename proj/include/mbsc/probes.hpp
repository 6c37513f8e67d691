#pragma once

#include <cstdint>
#include <vector>

#include "mbsc/graph.hpp"
#include "mbsc/linalg.hpp"

namespace mbsc {

enum class ProbeMode {
  iid,       // every component independently in {-p^-1/2, 0, +p^-1/2}
  shuffled,  // l = p*n columns per probe from an epoch-shuffled partition
};

/// Probe distribution: components are 0 with probability 1-p and
/// +-p^{-1/2} with probability p/2 each, so that E[r r^T] = I.
struct ProbeConfig {
  Index n = 0;
  double p = 1.0;
  int n_r = 1;
  std::uint64_t seed = 0;
  ProbeMode mode = ProbeMode::iid;

  /// Mini-batch view: l expected nonzeros per probe, p = l / n.
  static ProbeConfig from_batch(Index n, Index l, int n_r, std::uint64_t seed,
                                ProbeMode mode = ProbeMode::iid);

  /// l = p * n, rounded to the nearest integer.
  Index columns_per_probe() const;
  /// Nominal mini-batch size m = l * N_r.
  Index batch_size() const { return columns_per_probe() * n_r; }

  void validate() const;
};

struct SparseProbe {
  std::vector<Index> indices;  // strictly increasing
  std::vector<double> signs;   // +1 or -1, same length as indices
  double scale = 1.0;          // p^{-1/2}

  std::size_t nnz() const { return indices.size(); }
  VectorXd dense(Index n) const;
};

/// Draw stream_id of the probe sequence. The result depends only on
/// (cfg.seed, stream_id); see probe_stream for the (iteration, probe) layout.
SparseProbe draw_probe(const ProbeConfig& cfg, std::uint64_t stream_id);

/// Stream id used by the optimizer for probe `i` of iteration `t`.
constexpr std::uint64_t probe_stream(std::uint64_t t, std::uint64_t i, std::uint64_t n_r) {
  return t * n_r + i;
}

/// L r r^T w for one probe: s = r^T w touches only the nonzero rows of w, and
/// L r reads only the matching columns of L.
MatrixXd probe_product(const LaplacianProvider& l, const SparseProbe& r, const MatrixXd& w);

}  // namespace mbsc
