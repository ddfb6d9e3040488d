#pragma once

// Data-parallel inner loops used by the policy network (dot / axpy over
// doubles) and by the problem and landscape code (byte-per-bit strings).
//
// Every kernel has a scalar reference implementation. Vector variants are
// compiled per ISA and picked once at startup from the running CPU; tests
// compare each variant against the scalar one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace metagen::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // number of positions where a[i] != b[i]; inputs hold 0/1 bytes
  std::size_t (*hamming)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
  // sum of 0/1 bytes
  std::size_t (*count_ones)(const std::uint8_t* a, std::size_t n);
};

std::string_view isa_name(Isa isa);

// Best ISA the running CPU supports among those compiled in.
Isa detected_isa();

// ISAs usable on this machine, scalar first.
std::vector<Isa> available_isas();

// Table for a specific ISA; throws std::invalid_argument if unavailable.
const KernelTable& kernels_for(Isa isa);

// The active table. Defaults to detected_isa(); the METAGEN_ISA environment
// variable ("scalar", "avx2", "neon") overrides it at first use.
const KernelTable& kernels();

// Switches the active table; used by equivalence tests and benchmarks.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline std::size_t hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return kernels().hamming(a.data(), b.data(), a.size());
}

inline std::size_t count_ones(std::span<const std::uint8_t> a) {
  return kernels().count_ones(a.data(), a.size());
}

namespace detail {
const KernelTable* scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled for this target
const KernelTable* neon_table();  // nullptr when not compiled for this target
}  // namespace detail

}  // namespace metagen::simd
