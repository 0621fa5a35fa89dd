#pragma once

#include <cstdint>
#include <random>

namespace cvmdl::rng {

// splitmix64 finalizer; used to derive independent substreams from a
// master seed by mixing in purpose/trial/batch keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

// A value-type handle on a deterministic random stream. Children derived
// with distinct keys are statistically independent of each other and of
// the parent.
struct Stream {
  std::uint64_t seed = 0;

  Stream child(std::uint64_t key) const { return Stream{combine(seed, key)}; }
  std::mt19937_64 engine() const { return std::mt19937_64(mix64(seed)); }
};

// Fixed purpose keys so that (purpose, trial, batch) substreams never collide.
enum class Purpose : std::uint64_t {
  Exploration = 1,
  Exploitation = 2,
  Oracle = 3,
  Baseline = 4,
};

inline Stream derive(std::uint64_t base_seed, Purpose purpose,
                     std::uint64_t trial = 0, std::uint64_t batch = 0) {
  Stream s{base_seed};
  return s.child(static_cast<std::uint64_t>(purpose)).child(trial).child(batch);
}

}  // namespace cvmdl::rng
