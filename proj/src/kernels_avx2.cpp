// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check.
#include <immintrin.h>

#include "poolgt/kernels.hpp"

namespace poolgt::kernels::avx2 {

namespace {

inline __m256d horner4(std::span<const double> coeffs, __m256d x) {
  if (coeffs.empty()) return _mm256_setzero_pd();
  __m256d acc = _mm256_set1_pd(coeffs.back());
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) {
    acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coeffs[i]));
  }
  return acc;
}

inline __m256d pair_risk4(__m256d x) {
  const __m256d two_x = _mm256_add_pd(x, x);
  return _mm256_fnmadd_pd(x, x, two_x);
}

}  // namespace

void poly_eval(std::span<const double> coeffs, std::span<const double> xs, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= xs.size(); i += 4) {
    _mm256_storeu_pd(out.data() + i, horner4(coeffs, _mm256_loadu_pd(xs.data() + i)));
  }
  for (; i < xs.size(); ++i) out[i] = horner(coeffs, xs[i]);
}

void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= xs.size(); i += 4) {
    const __m256d x = _mm256_loadu_pd(xs.data() + i);
    _mm256_storeu_pd(out.data() + i, _mm256_div_pd(horner4(num, x), horner4(den, x)));
  }
  for (; i < xs.size(); ++i) out[i] = horner(num, xs[i]) / horner(den, xs[i]);
}

void pair_risk(std::span<const double> xs, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= xs.size(); i += 4) {
    _mm256_storeu_pd(out.data() + i, pair_risk4(_mm256_loadu_pd(xs.data() + i)));
  }
  for (; i < xs.size(); ++i) out[i] = kernels::pair_risk(xs[i]);
}

void compound_step(std::span<const double> xs, std::span<const double> inner,
                   std::span<double> out) {
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= xs.size(); i += 4) {
    const __m256d x = _mm256_loadu_pd(xs.data() + i);
    const __m256d num = _mm256_add_pd(pair_risk4(x), _mm256_loadu_pd(inner.data() + i));
    _mm256_storeu_pd(out.data() + i, _mm256_div_pd(num, _mm256_sub_pd(two, x)));
  }
  for (; i < xs.size(); ++i) out[i] = (kernels::pair_risk(xs[i]) + inner[i]) / (2.0 - xs[i]);
}

std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out) {
  const __m256i thr = _mm256_set1_epi64x(threshold);
  std::size_t ones = 0;
  std::size_t i = 0;
  for (; i + 4 <= bits.size(); i += 4) {
    const __m256i raw = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits.data() + i));
    const __m256i k = _mm256_srli_epi64(raw, 11);
    const int mask = _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(thr, k)));
    for (int lane = 0; lane < 4; ++lane) out[i + lane] = static_cast<std::uint8_t>((mask >> lane) & 1);
    ones += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
  }
  for (; i < bits.size(); ++i) {
    out[i] = static_cast<std::int64_t>(bits[i] >> 11) < threshold ? 1 : 0;
    ones += out[i];
  }
  return ones;
}

}  // namespace poolgt::kernels::avx2
