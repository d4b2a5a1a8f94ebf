#include "htmm/rng.hpp"

namespace htmm {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed ^ 0x243F6A8885A308D3ULL);
  for (std::uint64_t id : path) h = mix64(h ^ mix64(id + 0x9E3779B97F4A7C15ULL));
  return Rng(h);
}

}  // namespace htmm
