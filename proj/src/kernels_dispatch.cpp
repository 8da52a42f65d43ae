#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "poolgt/kernels.hpp"

namespace poolgt::kernels {

namespace {

Isa probe() {
#if defined(POOLGT_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{probe()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) {
    throw std::invalid_argument("AVX2 kernels are not available on this machine");
  }
  active().store(isa, std::memory_order_relaxed);
}

#if defined(POOLGT_HAVE_AVX2)
#define POOLGT_DISPATCH(fn, ...) \
  (active_isa() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define POOLGT_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void poly_eval(std::span<const double> coeffs, std::span<const double> xs, std::span<double> out) {
  POOLGT_DISPATCH(poly_eval, coeffs, xs, out);
}

void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out) {
  POOLGT_DISPATCH(rational_eval, num, den, xs, out);
}

void pair_risk(std::span<const double> xs, std::span<double> out) {
  POOLGT_DISPATCH(pair_risk, xs, out);
}

void compound_step(std::span<const double> xs, std::span<const double> inner,
                   std::span<double> out) {
  POOLGT_DISPATCH(compound_step, xs, inner, out);
}

std::int64_t bernoulli_threshold(double p) {
  if (!(p > 0.0)) return 0;
  if (p >= 1.0) return std::numeric_limits<std::int64_t>::max();
  // p * 2^53 is exact; k < t for integer k iff k < ceil(t).
  return static_cast<std::int64_t>(std::ceil(std::ldexp(p, 53)));
}

std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out) {
  return POOLGT_DISPATCH(bernoulli_fill, bits, threshold, out);
}

#undef POOLGT_DISPATCH

}  // namespace poolgt::kernels
