#include "metagen/simd/kernels.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#include <arm_neon.h>
#define METAGEN_HAVE_NEON_KERNELS 1
#endif

namespace metagen::simd {

#if METAGEN_HAVE_NEON_KERNELS
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

std::size_t hamming_neon(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  std::size_t d = 0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    uint8x16_t x = veorq_u8(vld1q_u8(a + i), vld1q_u8(b + i));
    d += vaddlvq_u8(x);
  }
  for (; i < n; ++i) d += (a[i] != b[i]);
  return d;
}

std::size_t count_ones_neon(const std::uint8_t* a, std::size_t n) {
  std::size_t s = 0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) s += vaddlvq_u8(vld1q_u8(a + i));
  for (; i < n; ++i) s += a[i];
  return s;
}

constexpr KernelTable kNeon{Isa::neon, dot_neon, axpy_neon, hamming_neon, count_ones_neon};

}  // namespace

const KernelTable* detail::neon_table() { return &kNeon; }
#else
const KernelTable* detail::neon_table() { return nullptr; }
#endif

}  // namespace metagen::simd
