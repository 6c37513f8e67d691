#include "mbsc/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbsc/random.hpp"

namespace mbsc {

namespace {
constexpr std::uint64_t kIidTag = 0x1d1d;
constexpr std::uint64_t kPermTag = 0x9e57;
constexpr std::uint64_t kSignTag = 0x5197;
}  // namespace

ProbeConfig ProbeConfig::from_batch(Index n, Index l, int n_r, std::uint64_t seed, ProbeMode mode) {
  if (n < 1 || l < 1 || l > n) {
    throw ContractViolation("probe batch: need 1 <= l <= n (l = " + std::to_string(l) +
                            ", n = " + std::to_string(n) + ")");
  }
  ProbeConfig cfg{n, static_cast<double>(l) / static_cast<double>(n), n_r, seed, mode};
  cfg.validate();
  return cfg;
}

Index ProbeConfig::columns_per_probe() const {
  return static_cast<Index>(std::llround(p * static_cast<double>(n)));
}

void ProbeConfig::validate() const {
  if (n < 1) throw ContractViolation("probe config: n must be positive");
  if (!(p > 0.0 && p <= 1.0)) {
    throw ContractViolation("probe config: p must lie in (0, 1], got " + std::to_string(p));
  }
  if (n_r < 1) throw ContractViolation("probe config: N_r must be at least 1");
  if (mode == ProbeMode::shuffled && columns_per_probe() < 1) {
    throw ContractViolation("probe config: shuffled mode needs p * n >= 1");
  }
}

VectorXd SparseProbe::dense(Index n) const {
  VectorXd r = VectorXd::Zero(n);
  for (std::size_t c = 0; c < indices.size(); ++c) r(indices[c]) = signs[c] * scale;
  return r;
}

SparseProbe draw_probe(const ProbeConfig& cfg, std::uint64_t stream_id) {
  cfg.validate();
  SparseProbe probe;
  if (cfg.mode == ProbeMode::iid) {
    probe.scale = 1.0 / std::sqrt(cfg.p);
    CounterRng rng(stream_key(cfg.seed, kIidTag, stream_id));
    const double half = 0.5 * cfg.p;
    for (Index i = 0; i < cfg.n; ++i) {
      const double u = rng.uniform();
      if (u < cfg.p) {
        probe.indices.push_back(i);
        probe.signs.push_back(u < half ? -1.0 : 1.0);
      }
    }
    return probe;
  }

  // Shuffled partition: each epoch splits a fresh permutation into B chunks of
  // nearly equal size. Every index is hit once per epoch with weight B, so
  // E[r r^T] = I holds exactly over an epoch.
  const Index l = cfg.columns_per_probe();
  const auto batches = static_cast<std::uint64_t>((cfg.n + l - 1) / l);
  const std::uint64_t epoch = stream_id / batches;
  const std::uint64_t slot = stream_id % batches;
  std::vector<Index> perm(static_cast<std::size_t>(cfg.n));
  std::iota(perm.begin(), perm.end(), Index(0));
  CounterRng perm_rng(stream_key(cfg.seed, kPermTag, epoch));
  std::shuffle(perm.begin(), perm.end(), perm_rng);
  const auto n = static_cast<std::uint64_t>(cfg.n);
  const std::uint64_t begin = slot * n / batches;
  const std::uint64_t end = (slot + 1) * n / batches;
  probe.indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                       perm.begin() + static_cast<std::ptrdiff_t>(end));
  std::sort(probe.indices.begin(), probe.indices.end());
  probe.scale = std::sqrt(static_cast<double>(batches));
  CounterRng sign_rng(stream_key(cfg.seed, kSignTag, stream_id));
  probe.signs.resize(probe.indices.size());
  for (auto& s : probe.signs) s = (sign_rng() >> 63) ? -1.0 : 1.0;
  return probe;
}

MatrixXd probe_product(const LaplacianProvider& l, const SparseProbe& r, const MatrixXd& w) {
  if (w.rows() != l.size()) throw ContractViolation("probe_product: shape mismatch");
  const auto nnz = static_cast<Index>(r.nnz());
  if (nnz == 0) return MatrixXd::Zero(w.rows(), w.cols());

  Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(w.cols());
  VectorXd lr = VectorXd::Zero(w.rows());
  for (Index c = 0; c < nnz; ++c) {
    const double coeff = r.signs[static_cast<std::size_t>(c)] * r.scale;
    const Index j = r.indices[static_cast<std::size_t>(c)];
    s.noalias() += coeff * w.row(j);
    l.add_scaled_column(j, coeff, lr);
  }
  return lr * s;
}

}  // namespace mbsc
