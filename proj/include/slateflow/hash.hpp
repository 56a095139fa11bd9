#pragma once

#include <cstdint>
#include <string_view>

namespace slateflow {

// FNV-1a, 64 bit. All routing and dispatch decisions hash with this so that
// every node computes identical placements from identical inputs.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Hash of (key ‖ 0x00 ‖ function name): the unit of placement is always the
// pair, never the key alone.
inline std::uint64_t key_function_hash(std::string_view key,
                                       std::string_view function) {
  std::uint64_t h = fnv1a64(key);
  h ^= 0x00;
  h *= kFnvPrime;
  return fnv1a64(function, h);
}

// splitmix64 finalizer, used where one hash must yield two independent
// choices (primary/secondary worker).
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace slateflow
