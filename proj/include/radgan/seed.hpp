#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace radgan {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable sub-seed for a named purpose under a root seed.
inline uint64_t derive_seed(uint64_t root, std::string_view purpose) { return splitmix64(root ^ fnv1a(purpose)); }

inline uint64_t mix_seed(uint64_t root, std::initializer_list<uint64_t> parts) {
  uint64_t h = splitmix64(root);
  for (uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

}  // namespace radgan
