#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace metagen {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x);

// Counter-style stream derivation: the seed of a child stream is a pure
// function of its parent seed and integer path, so results never depend on
// the order in which streams are created or consumed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Stable 64-bit hash of a label, for mixing names into derive_seed paths.
std::uint64_t label_hash(std::string_view label);

// Engine plus the handful of draws the library needs. The draws are written
// out explicitly (instead of std::*_distribution) so sequences are identical
// across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); n > 0
  std::uint64_t below(std::uint64_t n);

  bool bit() { return (engine_() >> 63) != 0; }

  // standard normal (Box-Muller, one value per call)
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace metagen
