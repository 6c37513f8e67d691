#include <doctest.h>

#include <cmath>
#include <vector>

#include "mbsc/error.hpp"
#include "mbsc/metrics.hpp"
#include "mbsc/random.hpp"

using namespace mbsc;

namespace {

std::vector<int> v(std::initializer_list<int> x) { return x; }

}  // namespace

TEST_CASE("nmi on identical, relabeled and independent partitions") {
  CHECK(nmi(v({0, 0, 1, 1}), v({0, 0, 1, 1})) == 1.0);
  CHECK(nmi(v({0, 0, 1, 1}), v({1, 1, 0, 0})) == 1.0);
  CHECK(nmi(v({0, 0, 1, 1}), v({0, 1, 0, 1})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(nmi(v({0, 0, 1, 1}), v({7, 7, -3, -3})) == 1.0);
}

TEST_CASE("nmi degenerate entropies") {
  CHECK(nmi(v({0, 0, 0}), v({5, 5, 5})) == 1.0);
  CHECK(nmi(v({0, 0, 0}), v({0, 1, 2})) == 0.0);
  CHECK(nmi(v({3}), v({4})) == 1.0);
}

TEST_CASE("nmi against a hand-computed contingency table") {
  // a = [0,0,0,1,1,1], b = [0,0,1,1,1,1]
  // joint: (0,0)=2 (0,1)=1 (1,1)=3; H(a) = ln 2, H(b) = -(1/3 ln 1/3 + 2/3 ln 2/3).
  const std::vector<int> a = {0, 0, 0, 1, 1, 1}, b = {0, 0, 1, 1, 1, 1};
  const double ha = std::log(2.0);
  const double hb = -(1.0 / 3 * std::log(1.0 / 3) + 2.0 / 3 * std::log(2.0 / 3));
  const double mi = 2.0 / 6 * std::log((2.0 / 6) / (0.5 * 1.0 / 3)) +
                    1.0 / 6 * std::log((1.0 / 6) / (0.5 * 2.0 / 3)) +
                    3.0 / 6 * std::log((3.0 / 6) / (0.5 * 2.0 / 3));
  CHECK(nmi(a, b) == doctest::Approx(mi / std::sqrt(ha * hb)).epsilon(1e-12));
  CHECK(nmi(a, b, NmiNormalization::arithmetic) == doctest::Approx(mi / (0.5 * (ha + hb))).epsilon(1e-12));
}

TEST_CASE("nmi properties on random labelings") {
  CounterRng rng(stream_key(3, 1));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(40), b(40);
    for (auto& x : a) x = static_cast<int>(rng.uniform() * 4);
    for (auto& x : b) x = static_cast<int>(rng.uniform() * 3);
    const double s = nmi(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(nmi(b, a)).epsilon(1e-12));
    std::vector<int> perm = a;
    for (auto& x : perm) x = 3 - x;
    CHECK(s == doctest::Approx(nmi(perm, b)).epsilon(1e-12));
    CHECK(nmi(a, perm) == 1.0);
    if (s == 1.0) CHECK(nmi(a, b) == 1.0);
  }
}

TEST_CASE("nmi contract") {
  CHECK_THROWS_AS(nmi(v({0, 1}), v({0})), ContractViolation);
  CHECK_THROWS_AS(nmi(std::vector<int>{}, std::vector<int>{}), ContractViolation);
}

TEST_CASE("mbsc_iter_flops") {
  CHECK(mbsc_iter_flops(1000, 5, 50) == 2 * 1000 * 5 * 50 + 6 * 1000 * 25 - 25);
  CHECK(mbsc_iter_flops(1000, 5, 50) == 649975);
  CHECK(mbsc_iter_flops(1, 1, 1) == 7);
  for (std::uint64_t m : {1, 7, 64})
    CHECK(mbsc_iter_flops(300, 4, 2 * m) - mbsc_iter_flops(300, 4, m) == 2 * 300 * 4 * m);
  const FlopLedger l = mbsc_iter_ledger(1000, 5, 50);
  CHECK(l.total() == 649975);
  CHECK(l.gradient == 500000);
  CHECK(l.retraction == 2 * 1000 * 25);
}

TEST_CASE("FlopLedger accumulates per phase") {
  FlopLedger a;
  a.gradient = 1;
  a.other = 2;
  FlopLedger b;
  b.gradient = 10;
  b.eig_svd = 5;
  a += b;
  CHECK(a.gradient == 11);
  CHECK(a.eig_svd == 5);
  CHECK(a.total() == 18);
}
