#include "poolgt/rng.hpp"

#include <vector>

#include "poolgt/kernels.hpp"

namespace poolgt {

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t sub) {
  SplitMix64 a(seed);
  std::uint64_t s = a.next() ^ (index * 0xD1B54A32D192ED03ull);
  SplitMix64 b(s);
  s = b.next() ^ (sub * 0x8CB92BA72F3D8DD7ull);
  SplitMix64 c(s);
  return c.next();
}

Rng::Rng(std::uint64_t seed) {
  SplitMix64 sm(seed);
  std::seed_seq seq{static_cast<std::uint32_t>(sm.next()), static_cast<std::uint32_t>(sm.next()),
                    static_cast<std::uint32_t>(sm.next()), static_cast<std::uint32_t>(sm.next())};
  engine_.seed(seq);
}

std::size_t Rng::bernoulli(double p, std::span<std::uint8_t> out) {
  const std::int64_t t = kernels::bernoulli_threshold(p);
  std::vector<std::uint64_t> buf(std::min<std::size_t>(out.size(), 4096));
  std::size_t ones = 0;
  for (std::size_t off = 0; off < out.size(); off += buf.size()) {
    const std::size_t n = std::min(buf.size(), out.size() - off);
    for (std::size_t i = 0; i < n; ++i) buf[i] = engine_();
    ones += kernels::bernoulli_fill(std::span(buf).first(n), t, out.subspan(off, n));
  }
  return ones;
}

}  // namespace poolgt
