#include "poolgt/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace poolgt::kernels::scalar {

void poly_eval(std::span<const double> coeffs, std::span<const double> xs, std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = horner(coeffs, xs[i]);
}

void rational_eval(std::span<const double> num, std::span<const double> den,
                   std::span<const double> xs, std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = horner(num, xs[i]) / horner(den, xs[i]);
}

void pair_risk(std::span<const double> xs, std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = kernels::pair_risk(xs[i]);
}

void compound_step(std::span<const double> xs, std::span<const double> inner,
                   std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = (kernels::pair_risk(xs[i]) + inner[i]) / (2.0 - xs[i]);
  }
}

std::size_t bernoulli_fill(std::span<const std::uint64_t> bits, std::int64_t threshold,
                           std::span<std::uint8_t> out) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto k = static_cast<std::int64_t>(bits[i] >> 11);
    out[i] = k < threshold ? 1 : 0;
    ones += out[i];
  }
  return ones;
}

}  // namespace poolgt::kernels::scalar
