#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mbsc/graph.hpp"
#include "support/fixtures.hpp"

using namespace mbsc;
using mbsc::testing::gaussian_cloud;
using mbsc::testing::gaussian_matrix;

TEST_CASE("two points normalize to the swap matrix") {
  for (double sigma : {0.1, 1.0, 7.0}) {
    Dataset ds;
    ds.points.resize(2, 2);
    ds.points << 0, 0, 1, 2;
    for (auto mode : {ExponentMode::distance, ExponentMode::squared_distance}) {
      auto l = build_materialized(ds, {sigma, mode});
      MatrixXd expected(2, 2);
      expected << 0, 1, 1, 0;
      CHECK((l->matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("three equidistant points give off-diagonals of one half") {
  Dataset ds;
  ds.points.resize(3, 2);
  ds.points << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2.0;
  auto l = build_materialized(ds, {0.8, ExponentMode::distance});
  const double a = std::exp(-1.0 / 0.64);
  for (Index i = 0; i < 3; ++i) {
    CHECK(l->degree()(i) == doctest::Approx(2.0 * a).epsilon(1e-12));
    CHECK(l->matrix()(i, i) == 0.0);
    for (Index j = 0; j < 3; ++j)
      if (i != j) CHECK(l->matrix()(i, j) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("kernel follows the exponent mode") {
  Dataset ds;
  ds.points.resize(3, 1);
  ds.points << 0, 2, 2;
  AffinityKernel dist(ds.points, {1.5, ExponentMode::distance});
  AffinityKernel sq(ds.points, {1.5, ExponentMode::squared_distance});
  CHECK(dist(0, 1) == doctest::Approx(std::exp(-2.0 / 2.25)));
  CHECK(sq(0, 1) == doctest::Approx(std::exp(-4.0 / 2.25)));
  CHECK(dist(1, 2) == 1.0);  // duplicate points
  CHECK(sq(1, 2) == 1.0);
  CHECK(dist(1, 1) == 0.0);
  CHECK(parse_exponent_mode("squared-distance") == ExponentMode::squared_distance);
  CHECK(parse_exponent_mode(to_string(ExponentMode::distance)) == ExponentMode::distance);
  CHECK_THROWS_AS(parse_exponent_mode("cubed"), ConfigError);
}

TEST_CASE("materialized Laplacian invariants") {
  const Dataset ds = gaussian_cloud(40, 3, 5);
  auto l = build_materialized(ds, {1.2, ExponentMode::distance});
  const MatrixXd& m = l->matrix();
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.diagonal().isZero());
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0);

  // Top eigenvector is proportional to sqrt(degree), with eigenvalue 1.
  const VectorXd u = l->degree().cwiseSqrt().normalized();
  CHECK((m * u - u).norm() <= 1e-8);

  for (std::uint64_t s = 0; s < 5; ++s) {
    const VectorXd v = gaussian_matrix(40, 1, s).col(0).normalized();
    CHECK((m * v).norm() <= 1.0 + 1e-10);
  }
}

TEST_CASE("streaming and materialized backings agree") {
  const Dataset ds = gaussian_cloud(50, 2, 8);
  const AffinityConfig cfg{0.9, ExponentMode::squared_distance};
  auto mat = build_materialized(ds, cfg);
  auto str = build_streaming(ds, cfg);
  CHECK((mat->degree() - str->degree()).cwiseAbs().maxCoeff() <= 1e-12);
  VectorXd col(50);
  for (Index j = 0; j < 50; ++j) {
    str->column_into(j, col);
    CHECK((col - mat->matrix().col(j)).cwiseAbs().maxCoeff() <= 1e-14);
  }
  const MatrixXd w = gaussian_matrix(50, 3, 2);
  CHECK((str->full_matvec(w) - mat->full_matvec(w)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("columns and full_matvec are consistent") {
  auto l = build_materialized(gaussian_cloud(30, 2, 1), {1.0, ExponentMode::distance});
  std::vector<Index> all(30);
  std::iota(all.begin(), all.end(), Index(0));
  CHECK(l->columns(all) == l->matrix());

  const std::vector<Index> rep = {4, 4, 2};
  const MatrixXd c = l->columns(rep);
  CHECK(c.col(0) == c.col(1));
  CHECK(c.col(2) == l->matrix().col(2));
  CHECK(c.col(0).norm() <= std::sqrt(30.0));

  for (Index j : {0, 7, 29}) {
    MatrixXd e = MatrixXd::Zero(30, 1);
    e(j, 0) = 1.0;
    const std::vector<Index> one = {j};
    CHECK((l->full_matvec(e) - l->columns(one)).cwiseAbs().maxCoeff() <= 1e-14);
  }
  CHECK(l->full_matvec(MatrixXd::Zero(30, 2)).isZero());

  const std::vector<Index> bad = {30};
  CHECK_THROWS_AS(l->columns(bad), ContractViolation);
}

TEST_CASE("two-point matvec") {
  auto l = MaterializedLaplacian::from_matrix((MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  MatrixXd w(2, 1);
  w << 1, 0;
  const MatrixXd out = l->full_matvec(w);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(1, 0) == 1.0);
}

TEST_CASE("column reads are counted") {
  auto l = build_streaming(gaussian_cloud(10, 2, 3), {1.0, ExponentMode::distance});
  const auto before = l->columns_read();
  const std::vector<Index> idx = {1, 2, 3};
  l->columns(idx);
  VectorXd acc = VectorXd::Zero(10);
  l->add_scaled_column(5, 2.0, acc);
  CHECK(l->columns_read() - before == 4);
}

TEST_CASE("add_scaled_column matches column_into on both backings") {
  const Dataset ds = gaussian_cloud(25, 2, 4);
  auto mat = build_materialized(ds, {0.7, ExponentMode::distance});
  auto str = build_streaming(ds, {0.7, ExponentMode::distance});
  for (const LaplacianProvider* p : {static_cast<const LaplacianProvider*>(mat.get()),
                                     static_cast<const LaplacianProvider*>(str.get())}) {
    VectorXd acc = VectorXd::Ones(25), col(25);
    p->add_scaled_column(3, -0.5, acc);
    p->column_into(3, col);
    CHECK((acc - (VectorXd::Ones(25) - 0.5 * col)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("isolated vertices are rejected") {
  Dataset ds;
  ds.points.resize(3, 1);
  ds.points << 0, 0.01, 1000;
  try {
    build_materialized(ds, {0.1, ExponentMode::squared_distance});
    FAIL("expected an isolated-vertex error");
  } catch (const IsolatedVertexError& e) {
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(build_streaming(ds, {0.1, ExponentMode::squared_distance}), IsolatedVertexError);
  CHECK_THROWS_AS(AffinityKernel(ds.points, {0.0, ExponentMode::distance}), ContractViolation);
}

TEST_CASE("degree blocks do not change the result") {
  const Dataset ds = gaussian_cloud(37, 2, 6);
  AffinityKernel kernel(ds.points, {1.0, ExponentMode::distance});
  const VectorXd a = compute_degrees(kernel, 4096);
  CHECK(compute_degrees(kernel, 5) == a);
  CHECK(compute_degrees(kernel, 1) == a);
}

TEST_CASE("degree cache round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mbsc_graph_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "deg.bin").string();
  const Dataset ds = gaussian_cloud(20, 2, 9);
  auto l = build_streaming(ds, {1.0, ExponentMode::distance});
  write_degree_cache(path, l->degree());
  CHECK(std::filesystem::file_size(path) == 8 + 8 + 20 * 8);
  const VectorXd back = read_degree_cache(path);
  CHECK(back == l->degree());
  auto cached = build_streaming(ds, {1.0, ExponentMode::distance}, back);
  VectorXd a(20), b(20);
  cached->column_into(4, a);
  l->column_into(4, b);
  CHECK(a == b);

  {
    std::ofstream bad(path, std::ios::binary);
    bad << "NOTMAGIC";
  }
  CHECK_THROWS(read_degree_cache(path));
  CHECK_THROWS(read_degree_cache((dir / "missing.bin").string()));
  std::filesystem::remove_all(dir);
}
