#include "mbsc/variance.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "mbsc/optimizer.hpp"

namespace mbsc {

MomentAccumulator::MomentAccumulator(Index dim)
    : mean_(VectorXd::Zero(dim)), m2_(VectorXd::Zero(dim)), m3_(VectorXd::Zero(dim)),
      m4_(VectorXd::Zero(dim)) {}

void MomentAccumulator::push(const VectorXd& x) {
  if (x.size() != mean_.size()) throw ContractViolation("MomentAccumulator: dimension mismatch");
  const double n1 = static_cast<double>(count_);
  ++count_;
  const double n = static_cast<double>(count_);
  const Eigen::ArrayXd delta = (x - mean_).array();
  const Eigen::ArrayXd dn = delta / n;
  const Eigen::ArrayXd dn2 = dn * dn;
  const Eigen::ArrayXd term1 = delta * dn * n1;
  mean_.array() += dn;
  m4_.array() += term1 * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * m2_.array() - 4 * dn * m3_.array();
  m3_.array() += term1 * dn * (n - 2) - 3 * dn * m2_.array();
  m2_.array() += term1;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size()) throw ContractViolation("MomentAccumulator: dimension mismatch");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const Eigen::ArrayXd d = (other.mean_ - mean_).array();
  const Eigen::ArrayXd d2 = d * d;
  const Eigen::ArrayXd a2 = m2_.array(), b2 = other.m2_.array();
  const Eigen::ArrayXd a3 = m3_.array(), b3 = other.m3_.array();

  m4_.array() += other.m4_.array() + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                 6 * d2 * (na * na * b2 + nb * nb * a2) / (n * n) + 4 * d * (na * b3 - nb * a3) / n;
  m3_.array() += b3 + d2 * d * na * nb * (na - nb) / (n * n) + 3 * d * (na * b2 - nb * a2) / n;
  m2_.array() += b2 + d2 * na * nb / n;
  mean_.array() += d * nb / n;
  count_ += other.count_;
}

VectorXd MomentAccumulator::variance() const {
  if (count_ < 2) return VectorXd::Zero(mean_.size());
  return m2_ / static_cast<double>(count_ - 1);
}

VectorXd MomentAccumulator::standard_error_mean() const {
  if (count_ < 2) return VectorXd::Zero(mean_.size());
  return (variance() / static_cast<double>(count_)).cwiseSqrt();
}

VectorXd MomentAccumulator::standard_error_variance() const {
  if (count_ < 4) return VectorXd::Zero(mean_.size());
  const double n = static_cast<double>(count_);
  const Eigen::ArrayXd sigma2 = m2_.array() / n;
  const Eigen::ArrayXd mu4 = m4_.array() / n;
  const Eigen::ArrayXd var_of_var = (mu4 - sigma2 * sigma2 * (n - 3) / (n - 1)) / n;
  return var_of_var.max(0.0).sqrt().matrix();
}

namespace {

void check_unit(const VectorXd& w) {
  if (std::abs(w.norm() - 1.0) > 1e-10) {
    throw ContractViolation("closed-form covariance needs a unit vector (||w|| = " +
                            std::to_string(w.norm()) + ")");
  }
}

void check_p(double p) {
  if (!(p > 0 && p <= 1)) throw ContractViolation("p must lie in (0, 1]");
}

}  // namespace

VectorXd analytic_diag_cov(const MatrixXd& l, const VectorXd& w, double p, int n_r) {
  if (l.rows() != l.cols() || l.cols() != w.size()) throw ContractViolation("analytic_diag_cov: shape mismatch");
  check_unit(w);
  check_p(p);
  if (n_r < 1) throw ContractViolation("analytic_diag_cov: N_r must be positive");
  const VectorXd g = l * w;
  const MatrixXd l2 = l.cwiseAbs2();
  const VectorXd ldl = l2 * w.cwiseAbs2();  // diag[L diag(w^2) L^T]
  const VectorXd llt = l2.rowwise().sum();  // diag[L L^T]
  const VectorXd cov = g.cwiseAbs2() + (1.0 / p - 3.0) * ldl + llt;
  return cov.cwiseMax(0.0) / static_cast<double>(n_r);
}

VectorXd single_probe_bound(const MatrixXd& l, const VectorXd& w, double p) {
  check_p(p);
  const VectorXd g = l * w;
  return g.cwiseAbs2() + (1.0 / p) * l.cwiseAbs2().rowwise().sum();
}

VectorXd mini_batch_bound(const MatrixXd& l, const VectorXd& w, double p, int n_r) {
  check_p(p);
  const double n = static_cast<double>(l.rows());
  const double batch = p * n;  // l
  const VectorXd g = l * w;
  return g.cwiseAbs2() / n_r + (n / (batch * n_r)) * l.cwiseAbs2().rowwise().sum();
}

DiagCovEstimate empirical_diag_cov(const LaplacianProvider& l, const VectorXd& w,
                                   const ProbeConfig& probe, std::uint64_t samples) {
  if (w.size() != l.size()) throw ContractViolation("empirical_diag_cov: shape mismatch");
  if (samples < 10000) throw ContractViolation("empirical_diag_cov: need at least 10^4 samples");
  const MatrixXd wm = w;
  MomentAccumulator acc(l.size());
  for (std::uint64_t s = 0; s < samples; ++s) {
    acc.push(stochastic_gradient(l, probe, wm, s).col(0));
  }
  return {acc.variance(), acc.standard_error_variance(), acc.count()};
}

VarianceReport variance_report(const LaplacianProvider& l, const VectorXd& w,
                               const ProbeConfig& probe, std::uint64_t samples) {
  const MatrixXd* dense = l.dense();
  MatrixXd built;
  if (dense == nullptr) {
    std::vector<Index> all(static_cast<std::size_t>(l.size()));
    std::iota(all.begin(), all.end(), Index(0));
    built = l.columns(all);
    dense = &built;
  }
  VarianceReport r;
  auto est = empirical_diag_cov(l, w, probe, samples);
  r.empirical_diag_cov = est.variance;
  r.standard_error = est.standard_error;
  r.analytic_diag_cov = analytic_diag_cov(*dense, w, probe.p, probe.n_r);
  r.bound_single_probe = single_probe_bound(*dense, w, probe.p);
  r.bound_mini_batch = mini_batch_bound(*dense, w, probe.p, probe.n_r);
  const double denom = r.analytic_diag_cov.norm();
  r.rel_error = denom > 0 ? (r.empirical_diag_cov - r.analytic_diag_cov).norm() / denom
                          : r.empirical_diag_cov.norm();
  r.samples = est.samples;
  r.p = probe.p;
  r.n_r = probe.n_r;
  r.seed = probe.seed;
  const VectorXd& bound = probe.n_r == 1 ? r.bound_single_probe : r.bound_mini_batch;
  r.within_bound =
      ((r.empirical_diag_cov - 3.0 * r.standard_error).array() <= bound.array()).all();
  return r;
}

std::string VarianceReport::to_json() const {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j = {
      {"empirical_diag_cov", vec(empirical_diag_cov)},
      {"analytic_diag_cov", vec(analytic_diag_cov)},
      {"standard_error", vec(standard_error)},
      {"bound_single_probe", vec(bound_single_probe)},
      {"bound_mini_batch", vec(bound_mini_batch)},
      {"rel_error", rel_error},
      {"samples", samples},
      {"p", p},
      {"n_r", n_r},
      {"seed", seed},
      {"within_bound", within_bound},
  };
  return j.dump(2);
}

AsymmetryReport asymmetry_experiment(const LaplacianProvider& l, const MatrixXd& w, Index m,
                                     const std::vector<BatchSplit>& splits,
                                     std::uint64_t replications, std::uint64_t seed) {
  const Index n = l.size();
  if (w.rows() != n) throw ContractViolation("asymmetry_experiment: shape mismatch");
  if (replications < 2) throw ContractViolation("asymmetry_experiment: need replications >= 2");
  const MatrixXd* dense = l.dense();
  if (dense == nullptr) throw ContractViolation("asymmetry_experiment: needs a materialized Laplacian");

  AsymmetryReport report;
  for (const auto& split : splits) {
    if (split.l * split.n_r != m) {
      throw ContractViolation("asymmetry_experiment: split l = " + std::to_string(split.l) +
                              ", N_r = " + std::to_string(split.n_r) + " does not give m = " +
                              std::to_string(m));
    }
    const ProbeConfig cfg = ProbeConfig::from_batch(n, split.l, split.n_r, seed);
    MomentAccumulator acc(n * w.cols());
    for (std::uint64_t rep = 0; rep < replications; ++rep) {
      const MatrixXd g = stochastic_gradient(l, cfg, w, rep);
      acc.push(g.reshaped());
    }
    SplitVariance out;
    out.split = split;
    out.p = cfg.p;
    out.empirical_total = acc.variance().sum();
    out.standard_error = acc.standard_error_variance().sum();  // upper bound, components correlate
    for (Index s = 0; s < w.cols(); ++s) {
      const VectorXd col = w.col(s);
      out.analytic_total += analytic_diag_cov(*dense, col, cfg.p, split.n_r).sum();
      out.bound_total += mini_batch_bound(*dense, col, cfg.p, split.n_r).sum();
    }
    report.splits.push_back(out);
  }
  report.order.resize(report.splits.size());
  std::iota(report.order.begin(), report.order.end(), std::size_t(0));
  std::stable_sort(report.order.begin(), report.order.end(), [&](std::size_t a, std::size_t b) {
    return report.splits[a].empirical_total < report.splits[b].empirical_total;
  });
  return report;
}

}  // namespace mbsc
