#include "mbsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "mbsc/error.hpp"

namespace mbsc {

namespace {

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = c / n;
    h -= p * std::log(p);
  }
  return h;
}

// True when a and b induce the same partition (a bijection between labels).
bool same_partition(std::span<const int> a, std::span<const int> b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it1, new1] = ab.try_emplace(a[i], b[i]);
    auto [it2, new2] = ba.try_emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

}  // namespace

double nmi(std::span<const int> a, std::span<const int> b, NmiNormalization norm) {
  if (a.size() != b.size()) throw ContractViolation("nmi: label vectors differ in length");
  if (a.empty()) throw ContractViolation("nmi: empty label vectors");
  if (same_partition(a, b)) return 1.0;

  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha <= 0.0 || hb <= 0.0) return 0.0;

  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += (c / n) * std::log(c * n / (ca[key.first] * cb[key.second]));
  }
  const double denom = norm == NmiNormalization::geometric ? std::sqrt(ha * hb) : 0.5 * (ha + hb);
  return std::clamp(mi / denom, 0.0, 1.0);
}

FlopLedger& FlopLedger::operator+=(const FlopLedger& rhs) {
  gradient += rhs.gradient;
  projection += rhs.projection;
  retraction += rhs.retraction;
  eig_svd += rhs.eig_svd;
  other += rhs.other;
  return *this;
}

std::uint64_t mbsc_iter_flops(std::uint64_t n, std::uint64_t k, std::uint64_t m) {
  return 2 * n * k * m + 6 * n * k * k - k * k;
}

FlopLedger mbsc_iter_ledger(std::uint64_t n, std::uint64_t k, std::uint64_t m) {
  FlopLedger ledger;
  ledger.gradient = 2 * n * k * m;
  ledger.projection = 4 * n * k * k - k * k;
  ledger.retraction = 2 * n * k * k;
  return ledger;
}

std::uint64_t power_multiply_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q) {
  return q * (2 * n * n * k - n * k);
}

std::uint64_t power_svd_flops(std::uint64_t n, std::uint64_t k) { return 2 * n * k * k + 2 * k * k * k; }

std::uint64_t power_total_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q) {
  return n * k + power_multiply_flops(n, k, q) + power_svd_flops(n, k);
}

std::uint64_t power_orthonormalization_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q) {
  return q > 0 ? (q - 1) * 2 * n * k * k : 0;
}

std::uint64_t nystrom_flops(std::uint64_t n, std::uint64_t k, std::uint64_t m) {
  // Positive and negative terms are summed separately to stay in unsigned range.
  const std::uint64_t plus = 6 * n * k + 8 * k * k * k + 4 * n * k * k + 2 * n * k * m + n * m +
                             2 * n * m * m + m * m + m * m * m;
  const std::uint64_t minus = 3 * k * k + 3 * k + n;
  return plus - minus;
}

}  // namespace mbsc
