#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace mbsc {

enum class NmiNormalization { geometric, arithmetic };

/// Normalized mutual information I(a;b) / sqrt(H(a) H(b)) (or the arithmetic
/// mean of the entropies), natural logs. Labels may be any integers.
double nmi(std::span<const int> a, std::span<const int> b,
           NmiNormalization norm = NmiNormalization::geometric);

/// Floating point additions and multiplications per phase. k-means is not
/// counted.
struct FlopLedger {
  std::uint64_t gradient = 0;
  std::uint64_t projection = 0;
  std::uint64_t retraction = 0;
  std::uint64_t eig_svd = 0;
  std::uint64_t other = 0;

  std::uint64_t total() const { return gradient + projection + retraction + eig_svd + other; }
  FlopLedger& operator+=(const FlopLedger& rhs);
};

/// One optimizer iteration: 2nkm + 6nk^2 - k^2.
std::uint64_t mbsc_iter_flops(std::uint64_t n, std::uint64_t k, std::uint64_t m);

/// Per-phase split of mbsc_iter_flops: gradient 2nkm, projection
/// (W^T G and W (W^T G)) 4nk^2 - k^2, QR retraction 2nk^2.
FlopLedger mbsc_iter_ledger(std::uint64_t n, std::uint64_t k, std::uint64_t m);

/// Power method multiplication phase: q rounds of 2n^2k - nk (q = 2 gives
/// 4n^2k - 2nk).
std::uint64_t power_multiply_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q);
/// Tall SVD of the n x k iterate: 2nk^2 + 2k^3.
std::uint64_t power_svd_flops(std::uint64_t n, std::uint64_t k);
/// Gaussian initialization n*k, multiplication phase and SVD.
std::uint64_t power_total_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q);
/// QR re-orthonormalization between rounds, reported outside the total.
std::uint64_t power_orthonormalization_flops(std::uint64_t n, std::uint64_t k, std::uint64_t q);

/// 6nk + 8k^3 - 3k^2 + 4nk^2 - 3k + 2nkm + nm + 2nm^2 + m^2 + m^3 - n.
std::uint64_t nystrom_flops(std::uint64_t n, std::uint64_t k, std::uint64_t m);

}  // namespace mbsc
