#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedspan {

using Rng = std::mt19937_64;

// Named sub-stream of a root seed. The same (root, name, a, b) always yields
// the same generator, independent of how many other streams were drawn.
inline Rng substream(std::uint64_t root, std::string_view name,
                     std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t s = mix(root ^ mix(h ^ mix(a ^ mix(b))));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

}  // namespace fedspan
