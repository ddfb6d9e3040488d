#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gen.hpp"
#include "metagen/problems.hpp"

using namespace metagen;

namespace {

BitString bits_of(unsigned mask, std::size_t d) {
  BitString x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = (mask >> i) & 1u;
  return x;
}

BitString parse_bits(const std::string& s) {
  BitString x;
  for (char c : s) x.push_back(c == '1' ? 1 : 0);
  return x;
}

// Reference objectives written independently of the library.
double ref_labs(const BitString& x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = x[i] ? 1 : -1;
  double e = 0;
  for (int k = 1; k < n; ++k) {
    int c = 0;
    for (int i = 0; i < n - k; ++i) c += s[i] * s[i + k];
    e += static_cast<double>(c) * c;
  }
  return static_cast<double>(n) * n / (2.0 * e);
}

double ref_nqueens(const BitString& x, int n) {
  std::vector<std::pair<int, int>> q;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (x[r * n + c]) q.emplace_back(r, c);
  int attacks = 0;
  for (std::size_t a = 0; a < q.size(); ++a)
    for (std::size_t b = a + 1; b < q.size(); ++b) {
      const int dr = q[a].first - q[b].first, dc = q[a].second - q[b].second;
      if (dr == 0 || dc == 0 || dr == dc || dr == -dc) ++attacks;
    }
  return static_cast<double>(q.size()) - static_cast<double>(n) * attacks;
}

double ref_ising_torus(const BitString& x, int n) {
  double agree = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const int self = x[r * n + c];
      agree += self == x[r * n + (c + 1) % n];
      agree += self == x[((r + 1) % n) * n + c];
    }
  return agree;
}

double ref_mivs(const BitString& x, const std::vector<std::pair<int, int>>& edges) {
  double f = 0;
  for (auto b : x) f += b;
  for (auto [u, v] : edges)
    if (x[u] && x[v]) f -= 2;
  return f;
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("known objective values") {
    const BitString ones625(625, 1);
    CHECK(make_instance(Family::onemax, 625, {}, 1).evaluate(ones625) == 625.0);
    CHECK(make_instance(Family::harmonic, 625, {}, 1).evaluate(ones625) == 195625.0);
    CHECK(make_instance(Family::harmonic, 625, {}, 1).known_optimum() == 195625.0);
    CHECK(make_instance(Family::leadingones, 4, {}, 1).evaluate(parse_bits("1101")) == 2.0);
    CHECK(make_instance(Family::ising_ring, 5, {}, 1).evaluate(BitString(5, 1)) == 5.0);

    const auto labs3 = make_instance(Family::labs, 3, {}, 1);
    CHECK(labs3.evaluate(parse_bits("110")) == 4.5);
    // brute force: 4.5 is the best merit factor for N=3
    double best = 0;
    for (unsigned m = 0; m < 8; ++m) {
      const auto x = bits_of(m, 3);
      CHECK(labs3.evaluate(x) == doctest::Approx(ref_labs(x)).epsilon(1e-15));
      best = std::max(best, ref_labs(x));
    }
    CHECK(best == 4.5);

    const auto tri = make_mivs_instance({{1, 2}, {0, 2}, {0, 1}});
    CHECK(tri.evaluate(parse_bits("100")) == 1.0);
    double tri_best = -1e9;
    for (unsigned m = 0; m < 8; ++m) tri_best = std::max(tri_best, tri.evaluate(bits_of(m, 3)));
    CHECK(tri_best == 1.0);
    CHECK(tri.evaluate(parse_bits("111")) == 3.0 - 2.0 * 3);
  }

  TEST_CASE("length mismatch and invalid dimensions") {
    const auto inst = make_instance(Family::onemax, 10, {}, 1);
    CHECK_THROWS_AS(inst.evaluate(BitString(9)), std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::nqueens, 24, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::ising_torus, 10, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::onemax, 0, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::labs, 10, {{WModelLayer::Kind::ruggedness, 2}}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::onemax, 10,
                                  {{WModelLayer::Kind::ruggedness, 2}, {WModelLayer::Kind::neutrality, 2}}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::onemax, 10, {{WModelLayer::Kind::epistasis, 9}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_instance(Family::onemax, 10, {{WModelLayer::Kind::dummy, 11}}, 1), std::invalid_argument);
  }

  TEST_CASE("construction examples") {
    CHECK(make_instance(Family::onemax, 100, {}, 1).known_optimum() == 100.0);
    const auto q = make_instance(Family::nqueens, 25, {}, 1);
    CHECK(q.dim() == 25);
    CHECK(q.known_optimum() == 5.0);
    CHECK_FALSE(make_instance(Family::labs, 20, {}, 1).known_optimum());
    CHECK_FALSE(make_instance(Family::mivs, 20, {}, 1).known_optimum());
  }

  TEST_CASE("exhaustive optima for d <= 12") {
    for (std::size_t d = 1; d <= 12; ++d) {
      std::vector<Family> fams{Family::onemax, Family::leadingones, Family::harmonic, Family::ising_ring,
                               Family::mivs};
      if (d >= 2) fams.push_back(Family::labs);
      const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
      if (n * n == d) {
        fams.push_back(Family::nqueens);
        fams.push_back(Family::ising_torus);
      }
      for (Family f : fams) {
        CAPTURE(family_name(f));
        CAPTURE(d);
        const auto inst = make_instance(f, d, {}, 7 + d);
        std::vector<std::pair<int, int>> edges;
        for (std::size_t u = 0; u < d && f == Family::mivs; ++u)
          for (std::size_t v : inst.graph()[u])
            if (v > u) edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
        double best = -1e18;
        for (unsigned m = 0; m < (1u << d); ++m) {
          const auto x = bits_of(m, d);
          const double v = inst.evaluate(x);
          best = std::max(best, v);
          // spot-check against the reference objectives
          if (m % 7 == 0) {
            double ref = 0;
            switch (f) {
              case Family::onemax:
                for (auto b : x) ref += b;
                break;
              case Family::leadingones:
                while (ref < static_cast<double>(d) && x[static_cast<std::size_t>(ref)]) ref += 1;
                break;
              case Family::harmonic:
                for (std::size_t i = 0; i < d; ++i) ref += x[i] ? static_cast<double>(i + 1) : 0.0;
                break;
              case Family::ising_ring:
                for (std::size_t i = 0; i < d; ++i) ref += x[i] == x[(i + 1) % d];
                break;
              case Family::labs:
                ref = ref_labs(x);
                break;
              case Family::nqueens:
                ref = ref_nqueens(x, static_cast<int>(n));
                break;
              case Family::ising_torus:
                ref = ref_ising_torus(x, static_cast<int>(n));
                break;
              case Family::mivs:
                ref = ref_mivs(x, edges);
                break;
            }
            REQUIRE(v == doctest::Approx(ref).epsilon(1e-12));
          }
        }
        if (inst.known_optimum()) CHECK(best == *inst.known_optimum());
        if (f == Family::onemax || f == Family::harmonic || f == Family::leadingones || f == Family::ising_ring)
          CHECK(inst.evaluate(BitString(d, 1)) == *inst.known_optimum());
        if (f == Family::ising_ring || f == Family::ising_torus)
          CHECK(inst.evaluate(BitString(d, 0)) == *inst.known_optimum());
      }
    }
  }

  TEST_CASE("neutrality") {
    CHECK(apply_neutrality(parse_bits("110011"), 3) == parse_bits("11"));
    CHECK(apply_neutrality(parse_bits("110001"), 3) == parse_bits("10"));
    CHECK(apply_neutrality(parse_bits("1001"), 2) == parse_bits("00"));  // ties -> 0
    CHECK(apply_neutrality(parse_bits("11011"), 2) == parse_bits("101"));  // remainder passes through
  }

  TEST_CASE("dummy") {
    Rng rng(3);
    const auto x = testgen::random_bits(rng, 40);
    CHECK(apply_dummy(x, 40, 99) == x);
    const auto pos = dummy_positions(40, 10, 5);
    CHECK(pos.size() == 10);
    CHECK(std::set<std::size_t>(pos.begin(), pos.end()).size() == 10);
    CHECK(dummy_positions(40, 10, 5) == pos);
    const auto y = apply_dummy(x, 10, 5);
    for (std::size_t i = 0; i < 10; ++i) CHECK(y[i] == x[pos[i]]);
  }

  TEST_CASE("epistasis is a seeded bijection") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      std::set<BitString> outs;
      for (unsigned m = 0; m < 16; ++m) outs.insert(apply_epistasis(bits_of(m, 4), 4, seed));
      CHECK(outs.size() == 16);
    }
    const auto t = epistasis_table(8, 11);
    CHECK(std::set<std::uint16_t>(t.begin(), t.end()).size() == 256);
    CHECK(epistasis_table(8, 11) == t);
    // trailing remainder untouched
    const auto x = parse_bits("1011" "0110" "1");
    CHECK(apply_epistasis(x, 4, 1).back() == 1);
  }

  TEST_CASE("ruggedness") {
    for (long long f = 0; f <= 10; ++f) CHECK(apply_ruggedness(f, 0, 10) == f);
    CHECK(apply_ruggedness(1, 1, 5) == 2);
    CHECK(apply_ruggedness(2, 1, 5) == 1);
    CHECK(apply_ruggedness(3, 1, 5) == 3);
    for (long long fmax = 1; fmax <= 12; ++fmax)
      for (std::size_t g = 0; g <= 8; ++g) {
        CHECK(apply_ruggedness(fmax, g, fmax) == fmax);
        // permutation of [0, fmax]
        std::set<long long> img;
        for (long long f = 0; f <= fmax; ++f) img.insert(apply_ruggedness(f, g, fmax));
        CHECK(img.size() == static_cast<std::size_t>(fmax + 1));
        CHECK(*img.rbegin() == fmax);
      }
  }

  TEST_CASE("layer composition") {
    Rng rng(17);
    const auto plain = make_instance(Family::onemax, 30, {}, 4);
    const auto neutral = make_instance(Family::onemax, 30, {{WModelLayer::Kind::neutrality, 3}}, 4);
    CHECK(neutral.working_length() == 10);
    CHECK(neutral.known_optimum() == 10.0);
    const auto stacked = make_instance(
        Family::onemax, 30,
        {{WModelLayer::Kind::dummy, 24}, {WModelLayer::Kind::epistasis, 4}, {WModelLayer::Kind::ruggedness, 3}}, 4);
    CHECK(stacked.working_length() == 24);
    for (int t = 0; t < 100; ++t) {
      const auto x = testgen::random_bits(rng, 30);
      CHECK(plain.evaluate(x) == plain.evaluate_base(x));
      double expect = 0;
      for (auto b : apply_neutrality(x, 3)) expect += b;
      CHECK(neutral.evaluate(x) == expect);
      CHECK(stacked.evaluate(x) == stacked.evaluate(x));
    }
    CHECK(stacked.evaluate(BitString(30, 1)) <= 24.0);
  }

  TEST_CASE("determinism across constructions") {
    Rng rng(5);
    const auto a = make_instance(Family::mivs, 60, {{WModelLayer::Kind::epistasis, 3}}, 42);
    const auto b = make_instance(Family::mivs, 60, {{WModelLayer::Kind::epistasis, 3}}, 42);
    CHECK(a.graph() == b.graph());
    for (int t = 0; t < 100; ++t) {
      const auto x = testgen::random_bits(rng, 60);
      CHECK(a.evaluate(x) == b.evaluate(x));
    }
    // mivs graph has roughly 4/d edge density
    std::size_t deg = 0;
    const auto big = make_instance(Family::mivs, 400, {}, 9);
    for (const auto& adj : big.graph()) deg += adj.size();
    const double mean_deg = static_cast<double>(deg) / 400.0;
    CHECK(mean_deg > 3.0);
    CHECK(mean_deg < 5.0);
  }

  TEST_CASE("problem keys") {
    const auto k = parse_problem_key("onemax+neutrality3:120");
    CHECK(k.family == Family::onemax);
    CHECK(k.dim == 120u);
    REQUIRE(k.layers.size() == 1);
    CHECK(k.layers[0] == WModelLayer{WModelLayer::Kind::neutrality, 3});
    CHECK(k.str() == "onemax:120+neutrality3");
    CHECK(parse_problem_key(k.str()).str() == k.str());
    CHECK(parse_problem_key("labs:625").dim == 625u);
    CHECK_FALSE(parse_problem_key("leadingones").dim);
    CHECK_THROWS_AS(parse_problem_key("nope:10"), std::invalid_argument);
    CHECK_THROWS_AS(parse_problem_key("onemax:10+wobble2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_problem_key("onemax:10+neutrality2:20"), std::invalid_argument);
    const auto inst = make_instance(parse_problem_key("leadingones"), 50, 1);
    CHECK(inst.dim() == 50);
    CHECK(inst.key() == "leadingones:50");
    CHECK_THROWS_AS(make_instance(parse_problem_key("leadingones"), std::nullopt, 1), std::invalid_argument);
  }
}
