#include "metagen/simd/kernels.hpp"

namespace metagen::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::size_t hamming_scalar(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < n; ++i) d += (a[i] != b[i]);
  return d;
}

std::size_t count_ones_scalar(const std::uint8_t* a, std::size_t n) {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

constexpr KernelTable kScalar{Isa::scalar, dot_scalar, axpy_scalar, hamming_scalar,
                              count_ones_scalar};

}  // namespace

const KernelTable* detail::scalar_table() { return &kScalar; }

}  // namespace metagen::simd
