#pragma once

// Reproducible randomness: std::mt19937_64 engines seeded through SplitMix64,
// one independent substream per (seed, stream index) pair. Both generators
// are fully specified by the C++ standard / their reference code, so draws
// are identical across platforms and compilers.

#include <cstdint>
#include <random>
#include <span>

namespace poolgt {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Seed of substream `index` (and optional second coordinate) under `seed`.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t sub = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t bits() { return engine_(); }
  // Independent Bernoulli(p) draws written as 0/1; returns the number of ones.
  std::size_t bernoulli(double p, std::span<std::uint8_t> out);

 private:
  std::mt19937_64 engine_;
};

}  // namespace poolgt
