#pragma once

// Data-parallel inner loops: polynomial / rational-function evaluation over
// risk grids, the pair-compounding recurrence step, and Bernoulli status
// draws. Each kernel has a scalar reference and an AVX2 variant; the variant
// is picked once at runtime from CPUID. Both variants use fused multiply-add
// at the same points so their results are bit-identical.

#include <cstdint>
#include <span>
#include <string_view>

namespace poolgt::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Best instruction set supported by this CPU and compiled into the binary.
Isa detected_isa();
// Instruction set currently used by the dispatching entry points.
Isa active_isa();
// Pins the dispatcher (tests, benchmarks). Throws std::invalid_argument if
// the requested set is not available.
void force_isa(Isa isa);

// coeffs are ordered from the constant term upwards.
void poly_eval(std::span<const double> coeffs, std::span<const double> xs,
               std::span<double> out);
void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out);
// out[i] = 2 x - x^2, the risk that a pair holds at least one positive.
void pair_risk(std::span<const double> xs, std::span<double> out);
// out[i] = (x2 + inner[i]) / (2 - x[i]) with x2 = pair_risk(x[i]).
void compound_step(std::span<const double> xs, std::span<const double> inner_at_pair_risk,
                   std::span<double> out);

// Integer threshold t such that (bits >> 11) < t  <=>  (bits >> 11) * 2^-53 < p.
std::int64_t bernoulli_threshold(double p);
// out[i] = 1 iff the top 53 bits of bits[i] fall under the threshold. Returns
// the number of ones written.
std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out);

namespace scalar {
void poly_eval(std::span<const double> coeffs, std::span<const double> xs, std::span<double> out);
void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out);
void pair_risk(std::span<const double> xs, std::span<double> out);
void compound_step(std::span<const double> xs, std::span<const double> inner,
                   std::span<double> out);
std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out);
}  // namespace scalar

#if defined(POOLGT_HAVE_AVX2)
namespace avx2 {
void poly_eval(std::span<const double> coeffs, std::span<const double> xs, std::span<double> out);
void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out);
void pair_risk(std::span<const double> xs, std::span<double> out);
void compound_step(std::span<const double> xs, std::span<const double> inner,
                   std::span<double> out);
std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out);
}  // namespace avx2
#endif

// Scalar single-point helpers shared by both variants for tails.
inline double horner(std::span<const double> coeffs, double x) {
  if (coeffs.empty()) return 0.0;
  double acc = coeffs.back();
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) acc = __builtin_fma(acc, x, coeffs[i]);
  return acc;
}

inline double pair_risk(double x) { return __builtin_fma(-x, x, 2.0 * x); }

}  // namespace poolgt::kernels
