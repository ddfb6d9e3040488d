#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "metagen/rng.hpp"
#include "metagen/simd/kernels.hpp"

using namespace metagen;
namespace simd = metagen::simd;

TEST_SUITE("simd") {
  TEST_CASE("every available isa matches the scalar kernels") {
    const auto& ref = simd::kernels_for(simd::Isa::scalar);
    Rng rng(11);
    for (simd::Isa isa : simd::available_isas()) {
      CAPTURE(simd::isa_name(isa));
      const auto& k = simd::kernels_for(isa);
      for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 31u, 32u, 33u, 63u, 64u, 100u, 257u, 1000u}) {
        CAPTURE(n);
        std::vector<double> a(n), b(n), y1(n), y2(n);
        std::vector<std::uint8_t> u(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
          a[i] = rng.normal();
          b[i] = rng.normal();
          y1[i] = y2[i] = rng.normal();
          u[i] = rng.bit();
          v[i] = rng.bit();
        }
        const double d_ref = ref.dot(a.data(), b.data(), n);
        const double d_isa = k.dot(a.data(), b.data(), n);
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::fabs(a[i] * b[i]);
        CHECK(std::fabs(d_ref - d_isa) <= 1e-13 * (scale + 1.0));

        ref.axpy(0.37, a.data(), y1.data(), n);
        k.axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(y1[i] - y2[i]) <= 1e-15 * (std::fabs(y1[i]) + 1.0));

        CHECK(ref.hamming(u.data(), v.data(), n) == k.hamming(u.data(), v.data(), n));
        CHECK(ref.count_ones(u.data(), n) == k.count_ones(u.data(), n));
      }
    }
  }

  TEST_CASE("scalar kernels agree with direct loops") {
    std::vector<std::uint8_t> a{1, 0, 1, 1, 0}, b{0, 0, 1, 0, 1};
    const auto& s = simd::kernels_for(simd::Isa::scalar);
    CHECK(s.hamming(a.data(), b.data(), 5) == 3);
    CHECK(s.count_ones(a.data(), 5) == 3);
    std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    CHECK(s.dot(x.data(), y.data(), 3) == 32.0);
    s.axpy(2.0, x.data(), y.data(), 3);
    CHECK(y == std::vector<double>{6, 9, 12});
  }

  TEST_CASE("active isa can be switched and restored") {
    const simd::Isa before = simd::kernels().isa;
    simd::set_active_isa(simd::Isa::scalar);
    CHECK(simd::kernels().isa == simd::Isa::scalar);
    simd::set_active_isa(before);
    CHECK(simd::kernels().isa == before);
    CHECK(simd::available_isas().front() == simd::Isa::scalar);
  }

  TEST_CASE("unsupported isa is rejected") {
    bool has_neon = false;
    for (auto i : simd::available_isas()) has_neon |= i == simd::Isa::neon;
    if (!has_neon) CHECK_THROWS_AS(simd::kernels_for(simd::Isa::neon), std::invalid_argument);
  }
}
