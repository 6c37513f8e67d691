#include <doctest.h>

#include <cmath>
#include <set>

#include "mbsc/probes.hpp"
#include "mbsc/variance.hpp"
#include "support/fixtures.hpp"

using namespace mbsc;
using mbsc::testing::gaussian_matrix;

TEST_CASE("p = 1 probes are dense signs") {
  const ProbeConfig cfg{30, 1.0, 1, 3, ProbeMode::iid};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SparseProbe r = draw_probe(cfg, s);
    CHECK(r.nnz() == 30);
    CHECK(r.scale == 1.0);
    for (double v : r.signs) CHECK(std::abs(v) == 1.0);
  }
}

TEST_CASE("probes are deterministic per stream and differ across streams") {
  const ProbeConfig cfg{100, 0.1, 1, 77, ProbeMode::iid};
  const SparseProbe a = draw_probe(cfg, 5), b = draw_probe(cfg, 5), c = draw_probe(cfg, 6);
  CHECK(a.indices == b.indices);
  CHECK(a.signs == b.signs);
  CHECK((a.indices != c.indices || a.signs != c.signs));
  for (std::size_t i = 1; i < a.indices.size(); ++i) CHECK(a.indices[i] > a.indices[i - 1]);
  CHECK(a.scale == doctest::Approx(1.0 / std::sqrt(0.1)));
}

TEST_CASE("nonzero fraction at p = 0.1 over 1e5 draws") {
  const ProbeConfig cfg{100, 0.1, 1, 1, ProbeMode::iid};
  std::uint64_t nnz = 0;
  const std::uint64_t draws = 100000;
  std::uint64_t minus = 0;
  for (std::uint64_t s = 0; s < draws; ++s) {
    const SparseProbe r = draw_probe(cfg, s);
    nnz += r.nnz();
    for (double v : r.signs) minus += v < 0;
  }
  const double frac = static_cast<double>(nnz) / static_cast<double>(draws * 100);
  CHECK(std::abs(frac - 0.1) <= 0.003);
  // Signs are balanced: binomial sd of the minus fraction is 1/(2 sqrt(nnz)).
  const double minus_frac = static_cast<double>(minus) / static_cast<double>(nnz);
  CHECK(std::abs(minus_frac - 0.5) <= 4.0 * 0.5 / std::sqrt(static_cast<double>(nnz)));
}

TEST_CASE("mini-batch view of the probe configuration") {
  const ProbeConfig cfg = ProbeConfig::from_batch(200, 20, 4, 0);
  CHECK(cfg.p == doctest::Approx(0.1));
  CHECK(cfg.columns_per_probe() == 20);
  CHECK(cfg.batch_size() == 80);
  CHECK_THROWS_AS(ProbeConfig::from_batch(10, 11, 1, 0), ContractViolation);
  CHECK_THROWS_AS(ProbeConfig::from_batch(10, 2, 0, 0), ContractViolation);
  CHECK_THROWS_AS((ProbeConfig{10, 0.0, 1, 0, ProbeMode::iid}).validate(), ContractViolation);
  CHECK_THROWS_AS((ProbeConfig{10, 1.5, 1, 0, ProbeMode::iid}).validate(), ContractViolation);
}

TEST_CASE("shuffled mode visits every column once per epoch") {
  const ProbeConfig cfg = ProbeConfig::from_batch(23, 5, 1, 9, ProbeMode::shuffled);
  const std::uint64_t batches = 5;  // ceil(23 / 5)
  for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
    std::multiset<Index> seen;
    for (std::uint64_t b = 0; b < batches; ++b) {
      const SparseProbe r = draw_probe(cfg, epoch * batches + b);
      CHECK(r.scale == doctest::Approx(std::sqrt(5.0)));
      seen.insert(r.indices.begin(), r.indices.end());
    }
    CHECK(seen.size() == 23);
    CHECK(std::set<Index>(seen.begin(), seen.end()).size() == 23);
  }
  // Different epochs use different partitions.
  CHECK(draw_probe(cfg, 0).indices != draw_probe(cfg, batches).indices);
}

TEST_CASE("probe_product equals the dense product") {
  auto l = mbsc::testing::cloud_laplacian(15, 2);
  const MatrixXd w = gaussian_matrix(15, 3, 4);
  const ProbeConfig cfg{15, 0.4, 1, 12, ProbeMode::iid};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const SparseProbe r = draw_probe(cfg, s);
    const VectorXd rd = r.dense(15);
    const MatrixXd expected = l->matrix() * rd * (rd.transpose() * w);
    CHECK((probe_product(*l, r, w) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("probe_product edge cases") {
  auto l = mbsc::testing::cloud_laplacian(6, 1);
  SparseProbe single;
  single.indices = {2};
  single.signs = {1.0};
  single.scale = 1.0;
  const MatrixXd w = gaussian_matrix(6, 2, 3);
  const MatrixXd expected = l->matrix().col(2) * w.row(2);
  CHECK((probe_product(*l, single, w) - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(probe_product(*l, single, MatrixXd::Zero(6, 2)).isZero());
  CHECK(probe_product(*l, SparseProbe{}, w).isZero());
  CHECK_THROWS_AS(probe_product(*l, single, MatrixXd::Zero(5, 2)), ContractViolation);
}

TEST_CASE("probe_product reads only the selected columns") {
  auto l = mbsc::testing::cloud_laplacian(40, 5);
  const ProbeConfig cfg{40, 0.1, 1, 3, ProbeMode::iid};
  const SparseProbe r = draw_probe(cfg, 1);
  const auto before = l->columns_read();
  probe_product(*l, r, gaussian_matrix(40, 2, 0));
  CHECK(l->columns_read() - before == r.nnz());
}

TEST_CASE("mean of 1e5 probe products on a random 10x10 matches LW") {
  const MatrixXd lm = mbsc::testing::random_symmetric(10, 5);
  auto l = MaterializedLaplacian::from_matrix(lm);
  const MatrixXd w = mbsc::testing::random_orthonormal(10, 2, 6);
  const ProbeConfig cfg{10, 0.3, 1, 2024, ProbeMode::iid};
  MomentAccumulator acc(20);
  for (std::uint64_t s = 0; s < 100000; ++s) acc.push(probe_product(*l, draw_probe(cfg, s), w).reshaped());
  const VectorXd exact = (lm * w).reshaped();
  const VectorXd se = acc.standard_error_mean();
  for (Index i = 0; i < 20; ++i) CHECK(std::abs(acc.mean()(i) - exact(i)) <= 4.0 * se(i));
}
