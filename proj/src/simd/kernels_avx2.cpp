#include "metagen/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define METAGEN_HAVE_AVX2_KERNELS 1
#endif

namespace metagen::simd {

#if METAGEN_HAVE_AVX2_KERNELS
namespace {

#define METAGEN_AVX2 __attribute__((target("avx2,fma")))

METAGEN_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

METAGEN_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

METAGEN_AVX2 std::uint64_t hsum_epi64(__m256i v) {
  __m128i lo = _mm256_castsi256_si128(v);
  __m128i hi = _mm256_extracti128_si256(v, 1);
  lo = _mm_add_epi64(lo, hi);
  return static_cast<std::uint64_t>(_mm_cvtsi128_si64(lo)) +
         static_cast<std::uint64_t>(_mm_extract_epi64(lo, 1));
}

// Bytes are 0/1, so xor yields 0/1 and sad_epu8 sums 8 bytes per lane.
METAGEN_AVX2 std::size_t hamming_avx2(const std::uint8_t* a, const std::uint8_t* b,
                                      std::size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  __m256i acc = zero;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    __m256i ne = _mm256_andnot_si256(_mm256_cmpeq_epi8(va, vb), _mm256_set1_epi8(1));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(ne, zero));
  }
  std::size_t d = hsum_epi64(acc);
  for (; i < n; ++i) d += (a[i] != b[i]);
  return d;
}

METAGEN_AVX2 std::size_t count_ones_avx2(const std::uint8_t* a, std::size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  __m256i acc = zero;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(va, zero));
  }
  std::size_t s = hsum_epi64(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

constexpr KernelTable kAvx2{Isa::avx2, dot_avx2, axpy_avx2, hamming_avx2, count_ones_avx2};

}  // namespace

const KernelTable* detail::avx2_table() { return &kAvx2; }
#else
const KernelTable* detail::avx2_table() { return nullptr; }
#endif

}  // namespace metagen::simd
