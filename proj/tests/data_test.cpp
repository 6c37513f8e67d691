#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mbsc/baselines.hpp"
#include "mbsc/data.hpp"
#include "mbsc/graph.hpp"
#include "mbsc/kmeans.hpp"
#include "mbsc/metrics.hpp"

using namespace mbsc;

TEST_CASE("parse_libsvm reads sparse rows") {
  const Dataset ds = parse_libsvm_string("1 1:0.5 3:2.0\n2 2:1.0");
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 3);
  MatrixXd expected(2, 3);
  expected << 0.5, 0, 2.0, 0, 1.0, 0;
  CHECK(ds.points == expected);
  REQUIRE(ds.labels);
  CHECK(*ds.labels == std::vector<int>{0, 1});
}

TEST_CASE("parse_libsvm maps labels by first appearance") {
  const Dataset ds = parse_libsvm_string("7 1:1\n-1 1:2\n7 1:3\n3.5 1:4\n");
  CHECK(*ds.labels == std::vector<int>{0, 1, 0, 2});
}

TEST_CASE("label-only line gives a zero row") {
  const Dataset ds = parse_libsvm_string("1 2:5\n0\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.points.row(1).isZero());
}

TEST_CASE("parse_libsvm skips blank lines and comments") {
  const Dataset ds = parse_libsvm_string("# header\n\n1 1:1\n  \n2 1:2 # trailing\n");
  CHECK(ds.size() == 2);
  CHECK(ds.points(1, 0) == 2.0);
}

TEST_CASE("parse_libsvm errors carry the line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_libsvm_string(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1 3:1 2:1") == 1);
  CHECK(line_of("1 1:1\n1 2:1 2:3\n") == 2);
  CHECK(line_of("1 1:1\nx 1:1\n") == 2);
  CHECK(line_of("1 1:abc\n") == 1);
  CHECK(line_of("1 0:1\n") == 1);
  CHECK(line_of("1 1-1\n") == 1);
}

TEST_CASE("empty input is an empty-dataset error") {
  CHECK_THROWS_AS(parse_libsvm_string(""), EmptyDatasetError);
  CHECK_THROWS_AS(parse_libsvm_string("\n# only a comment\n"), EmptyDatasetError);
}

TEST_CASE("libsvm round trip is bit exact") {
  Dataset ds = gen_blobs(2, 5, 3, 0.37, 99);
  ds.points(0, 1) = 0.0;
  ds.points(2, 2) = 1.0 / 3.0;
  ds.points(3, 0) = -1e-300;
  const Dataset back = parse_libsvm_string(serialize_libsvm(ds));
  CHECK(back.points == ds.points);
  CHECK(*back.labels == *ds.labels);
}

TEST_CASE("gen_blobs basic properties") {
  const Dataset one = gen_blobs(1, 20, 2, 0.1, 0);
  CHECK(std::all_of(one.labels->begin(), one.labels->end(), [](int l) { return l == 0; }));

  const Dataset a = gen_blobs(3, 100, 2, 0.1, 4);
  const Dataset b = gen_blobs(3, 100, 2, 0.1, 4);
  CHECK(a.points == b.points);
  CHECK(*a.labels == *b.labels);
  CHECK(a.size() == 300);

  // Cluster means are at least 10 spreads apart (sample means sit close to the centers).
  MatrixXd means = MatrixXd::Zero(3, 2);
  for (Index i = 0; i < a.size(); ++i) means.row((*a.labels)[i]) += a.points.row(i) / 100.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) CHECK((means.row(i) - means.row(j)).norm() > 0.9);
}

TEST_CASE("exact spectral clustering separates three blobs") {
  const Dataset ds = gen_blobs(3, 100, 2, 0.1, 0);
  const AffinityConfig cfg{median_sigma(ds, 300, 0), ExponentMode::distance};
  auto l = build_materialized(ds, cfg);
  const MatrixXd w = exact_topk(*l, 3);
  const auto km = kmeans(w, {3, 10, 300, 1, false});
  CHECK(nmi(km.labels, *ds.labels) >= 0.98);
}

TEST_CASE("gen_circles basic properties") {
  const Dataset single = gen_circles(50, {2.0}, 0.1, 3);
  CHECK(std::all_of(single.labels->begin(), single.labels->end(), [](int l) { return l == 0; }));

  const Dataset clean = gen_circles(60, {1.0, 3.0}, 0.0, 3);
  for (Index i = 0; i < clean.size(); ++i) {
    const double r = clean.points.row(i).norm();
    const double expected = (*clean.labels)[i] == 0 ? 1.0 : 3.0;
    CHECK(std::abs(r - expected) < 1e-12);
  }

  const Dataset noisy = gen_circles(400, {1.0, 3.0}, 0.05, 0);
  CHECK(noisy.size() == 400);
  CHECK(noisy.points == gen_circles(400, {1.0, 3.0}, 0.05, 0).points);
  for (Index i = 0; i < noisy.size(); ++i) {
    const double r = noisy.points.row(i).norm();
    CHECK(std::abs(r - ((*noisy.labels)[i] == 0 ? 1.0 : 3.0)) <= 0.05 + 1e-12);
  }

  CHECK_THROWS_AS(gen_circles(10, {3.0, 1.0}, 0.0, 0), ContractViolation);
  CHECK_THROWS_AS(gen_circles(10, {1.0, 2.0}, 0.5, 0), ContractViolation);
}

TEST_CASE("circles: spectral clustering succeeds where raw k-means fails") {
  const Dataset ds = gen_circles(400, {1.0, 3.0}, 0.05, 0);
  auto l = build_materialized(ds, {0.3, ExponentMode::distance});
  const MatrixXd w = exact_topk(*l, 2, {5000, ExactSolver::tridiagonal});
  CHECK(nmi(kmeans(w, {2, 10, 300, 1, false}).labels, *ds.labels) >= 0.95);
  CHECK(nmi(kmeans(ds.points, {2, 10, 300, 1, false}).labels, *ds.labels) <= 0.3);
}

TEST_CASE("median_sigma") {
  Dataset two;
  two.points.resize(2, 1);
  two.points << 0, 2;
  CHECK(median_sigma(two, 10, 0) == 2.0);

  // 3x3 unit grid: enumerate all 36 pairwise distances by brute force.
  Dataset grid;
  grid.points.resize(9, 2);
  for (int i = 0; i < 9; ++i) grid.points.row(i) << i % 3, i / 3;
  std::vector<double> d;
  for (int i = 0; i < 9; ++i)
    for (int j = i + 1; j < 9; ++j) d.push_back((grid.points.row(i) - grid.points.row(j)).norm());
  REQUIRE(d.size() == 36);
  std::sort(d.begin(), d.end());
  const double brute = 0.5 * (d[17] + d[18]);
  CHECK(brute == doctest::Approx(std::sqrt(2.0)));
  CHECK(median_sigma(grid, 9, 0) == doctest::Approx(brute));

  const Dataset ds = gen_blobs(2, 200, 3, 0.2, 1);
  CHECK(median_sigma(ds, 50, 7) == median_sigma(ds, 50, 7));

  Dataset same;
  same.points = MatrixXd::Ones(4, 2);
  CHECK_THROWS_AS(median_sigma(same, 4, 0), ZeroDistanceError);
}

TEST_CASE("registry carries the benchmark metadata") {
  const auto pen = find_registry_entry("pendigits");
  REQUIRE(pen);
  CHECK(pen->samples == 10992);
  CHECK(pen->sigma == 223.61);
  CHECK(find_registry_entry("Shuttle")->sigma == 0.45);
  CHECK(find_registry_entry("mnist")->sigma == 4.08);
  CHECK(find_registry_entry("covtype-ii")->samples == 581012);
  CHECK_FALSE(find_registry_entry("iris"));
}
