#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gen.hpp"
#include "metagen/interpreter.hpp"
#include "metagen/simd/kernels.hpp"

using namespace metagen;

namespace {

Population pop_of(std::initializer_list<double> fs, std::size_t d = 4) {
  Population p;
  std::uint8_t tag = 0;
  for (double f : fs) {
    BitString x(d, 0);
    for (std::size_t i = 0; i < d; ++i) x[i] = (tag >> i) & 1u;
    ++tag;
    p.push_back({x, f});
  }
  return p;
}

std::vector<double> fitnesses(const Population& p) {
  std::vector<double> v;
  for (const auto& ind : p) v.push_back(ind.f);
  return v;
}

bool has_component(const Program& p, Category c) {
  return std::any_of(p.snippets.begin(), p.snippets.end(),
                     [&](const Snippet& s) { return describe(s.component).category == c; });
}

}  // namespace

TEST_SUITE("interpreter") {
  TEST_CASE("random sampling oracle") {
    const auto inst = make_instance(Family::onemax, 30, {}, 1);
    const Program p = from_text("reinitialize | forward | once");
    for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
      for (std::size_t budget : {50u, 77u, 500u}) {
        const auto rep = run(p, inst, {budget, 10, seed, true}, nullptr);
        // same stream: budget-many strings of 30 bit draws each
        Rng rng(seed);
        double best = -1;
        for (std::size_t k = 0; k < budget; ++k) {
          double ones = 0;
          for (int i = 0; i < 30; ++i) ones += rng.bit() ? 1 : 0;
          best = std::max(best, ones);
        }
        CHECK(rep.best_fitness == best);
        CHECK(rep.fe_used == budget);
      }
    }
  }

  TEST_CASE("budget equal to population size") {
    const auto inst = make_instance(Family::onemax, 10, {}, 1);
    const auto rep = run(from_text("traverse | forward | once; reset_n(0.01) | forward | once"), inst,
                         {20, 20, 5, true});
    CHECK(rep.fe_used == 20);
    CHECK(rep.passes == 0);
    CHECK(rep.trace.empty());
    CHECK_THROWS_AS(run(from_text("traverse | forward | once"), inst, {19, 20, 5, true}), std::invalid_argument);
  }

  TEST_CASE("traverse and tournament") {
    const auto inst = make_instance(Family::onemax, 4, {}, 1);
    RunState st(inst, 100, 1);
    const auto p = pop_of({1, 2, 3});
    CHECK(fitnesses(exec_choose(Component::traverse, p, st)) == fitnesses(p));

    // exact enumeration of the two independent draws (a wins ties)
    const auto two = pop_of({5, 1});
    double exact = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) exact += 0.25 * ((two[a].f >= two[b].f ? two[a].f : two[b].f) == 5);
    CHECK(exact == 0.75);
    std::size_t fives = 0, total = 0;
    for (int k = 0; k < 50000; ++k)
      for (const auto& ind : exec_choose(Component::tournament, two, st)) {
        fives += ind.f == 5;
        ++total;
      }
    CHECK(static_cast<double>(fives) / static_cast<double>(total) == doctest::Approx(exact).epsilon(0.01));
  }

  TEST_CASE("roulette wheel") {
    const auto inst = make_instance(Family::onemax, 4, {}, 1);
    RunState st(inst, 100, 2);
    // flat fitness: uniform, chi-square over 1e5 draws with 9 dof
    Population flat = pop_of({3, 3, 3, 3, 3, 3, 3, 3, 3, 3});
    std::map<BitString, double> counts;
    std::size_t draws = 0;
    while (draws < 100000) {
      for (const auto& ind : exec_choose(Component::roulette_wheel, flat, st)) ++counts[ind.x];
      draws += flat.size();
    }
    CHECK(counts.size() == 10);
    const double expected = static_cast<double>(draws) / 10.0;
    double chi2 = 0;
    for (const auto& [x, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 27.88);  // p = 0.001

    // non-flat: proportional to f - f_min (+ tiny delta), so the minimum is almost never chosen
    Population skew = pop_of({0, 1, 3});
    std::map<double, double> by_f;
    draws = 0;
    while (draws < 60000) {
      for (const auto& ind : exec_choose(Component::roulette_wheel, skew, st)) by_f[ind.f] += 1;
      draws += skew.size();
    }
    CHECK(by_f[0] == 0);
    CHECK(by_f[1] / static_cast<double>(draws) == doctest::Approx(0.25).epsilon(0.03));
    CHECK(by_f[3] / static_cast<double>(draws) == doctest::Approx(0.75).epsilon(0.03));
  }

  TEST_CASE("nich keeps one leader per niche") {
    const auto inst = make_instance(Family::onemax, 20, {}, 1);
    RunState st(inst, 100, 3);
    Population p;
    BitString a(20, 0), b(20, 1);
    BitString a1 = a;
    a1[0] = 1;
    p.push_back({a, 0});
    p.push_back({a1, 1});
    p.push_back({b, 20});
    const auto out = exec_choose(Component::nich, p, st);
    REQUIRE(out.size() == 3);
    // leaders in fitness order: b (20) then a1 (1); a is within radius 2 of a1
    CHECK(out[0].f == 20);
    CHECK(out[1].f == 1);
  }

  TEST_CASE("search operators") {
    const auto inst = make_instance(Family::onemax, 50, {}, 1);
    RunState st(inst, 1000, 4);
    Rng gen(8);
    Population working;
    for (int i = 0; i < 6; ++i) {
      auto x = testgen::random_bits(gen, 50);
      working.push_back({x, inst.evaluate(x)});
    }
    const std::vector<double> n1{0.01};
    auto out = exec_search(Component::reset_n, n1, working, st);
    REQUIRE(out.size() == working.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(simd::hamming(working[i].x, out[i].x) == 1);

    const std::vector<double> n10{0.10};
    out = exec_search(Component::reset_n, n10, working, st);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(simd::hamming(working[i].x, out[i].x) == 5);

    const std::size_t before = st.fe_used;
    const std::vector<double> p0{0.0};
    out = exec_search(Component::reset_rand, p0, working, st);
    CHECK(st.fe_used == before + working.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].x == working[i].x);

    // uniform crossover with p=1 copies the mate, which differs from self
    Population pair{working[0], working[1]};
    const std::vector<double> p1{1.0};
    out = exec_search(Component::cross_uniform, p1, pair, st);
    CHECK(out[0].x == working[1].x);
    CHECK(out[1].x == working[0].x);

    // n-point crossover: every offspring bit comes from self or mate
    const std::vector<double> c2{0.05};
    out = exec_search(Component::cross_n, c2, pair, st);
    for (std::size_t k = 0; k < 50; ++k) CHECK((out[0].x[k] == pair[0].x[k] || out[0].x[k] == pair[1].x[k]));
    CHECK(cut_points_for(0.05, 50) == 3);
    CHECK(cut_points_for(0.45, 2) == 1);
    CHECK(flips_for(0.01, 50) == 1);
    CHECK(flips_for(0.45, 3) == 1);

    for (const auto& ind : out) CHECK(ind.f == inst.evaluate(ind.x));
  }

  TEST_CASE("search stops at the budget") {
    const auto inst = make_instance(Family::onemax, 10, {}, 1);
    RunState st(inst, 3, 4);
    const auto pop = pop_of({1, 1, 1, 1, 1}, 10);
    const std::vector<double> p{0.5};
    const auto out = exec_search(Component::reset_rand, p, pop, st);
    CHECK(out.size() == 3);
    CHECK(st.fe_used == 3);
  }

  TEST_CASE("select operators") {
    const auto inst = make_instance(Family::onemax, 4, {}, 1);
    RunState st(inst, 100, 5);
    auto g = exec_select(Component::greedy_select, {}, pop_of({3, 1, 2}), pop_of({2, 4}), st);
    CHECK(fitnesses(g) == std::vector<double>{4, 3, 2});

    CHECK(fitnesses(exec_select(Component::pairwise_select, {}, pop_of({3}), pop_of({4}), st)) ==
          std::vector<double>{4});
    CHECK(fitnesses(exec_select(Component::pairwise_select, {}, pop_of({5}), pop_of({4}), st)) ==
          std::vector<double>{5});
    // new wins ties
    auto tie_new = pop_of({7, 7});
    std::reverse(tie_new.begin(), tie_new.end());
    auto tied = exec_select(Component::pairwise_select, {}, pop_of({7, 7}), tie_new, st);
    CHECK(tied[0].x == tie_new[0].x);

    CHECK(fitnesses(exec_select(Component::always_select, {}, pop_of({9, 9, 9}), pop_of({1, 2, 3}), st)) ==
          std::vector<double>{1, 2, 3});
    // shorter fresh set is padded from the old population
    CHECK(fitnesses(exec_select(Component::always_select, {}, pop_of({9, 8, 7}), pop_of({1}), st)) ==
          std::vector<double>{1, 8, 7});

    // the 10s win every game, the 1s at most tie them and lose the stable order
    for (int k = 0; k < 50; ++k) {
      auto rr = exec_select(Component::round_robin_select, {}, pop_of({1, 1, 1}), pop_of({10, 10, 10}), st);
      CHECK(fitnesses(rr) == std::vector<double>{10, 10, 10});
    }

    // SA: improvements always accepted
    RunState sa(inst, 100, 6);
    for (int k = 0; k < 100; ++k) {
      auto out = exec_select(Component::simulated_annealing_select, {}, pop_of({1, 2}), pop_of({3, 4}), sa);
      CHECK(fitnesses(out) == std::vector<double>{3, 4});
    }
    CHECK_FALSE(sa.sa_temperature);
    // calibration: mean deterioration 2 -> T0 = 2 / -ln 0.8, then decay
    exec_select(Component::simulated_annealing_select, {}, pop_of({5, 5}), pop_of({4, 2}), sa);
    REQUIRE(sa.sa_temperature);
    CHECK(*sa.sa_temperature == doctest::Approx(2.0 / -std::log(0.8) * 0.995).epsilon(1e-12));
    // acceptance rate of a deterioration of 2 at T0 is 0.8^2
    RunState sa2(inst, 100, 7);
    sa2.sa_temperature = 2.0 / -std::log(0.8);
    std::size_t accepted = 0;
    for (int k = 0; k < 20000; ++k) {
      const double t = *sa2.sa_temperature;
      auto out = exec_select(Component::simulated_annealing_select, {}, pop_of({5}), pop_of({3}), sa2);
      accepted += out[0].f == 3;
      sa2.sa_temperature = t;
    }
    CHECK(static_cast<double>(accepted) / 20000.0 == doctest::Approx(std::pow(0.8, 1.0)).epsilon(0.03));

    // tabu: an accepted hash blocks the same solution later unless it beats the best
    const auto inst20 = make_instance(Family::onemax, 20, {}, 1);
    RunState tb(inst20, 100, 8);
    tb.best_before_pending = 100;
    const std::vector<double> frac{0.10};
    auto old = pop_of({1}, 20);
    auto fresh = pop_of({2}, 20);
    fresh[0].x[5] = 1;
    auto first = exec_select(Component::tabu, frac, old, fresh, tb);
    CHECK(first[0].f == 2);
    CHECK(tb.tabu_list.size() == 1);
    auto again = exec_select(Component::tabu, frac, old, fresh, tb);
    CHECK(again[0].f == 1);
    tb.best_before_pending = 1.5;  // aspiration
    auto asp = exec_select(Component::tabu, frac, old, fresh, tb);
    CHECK(asp[0].f == 2);
    // capacity round(0.1 * 20) = 2
    for (int k = 0; k < 5; ++k) {
      auto f = pop_of({3}, 20);
      f[0].x[10 + k] = 1;
      exec_select(Component::tabu, frac, old, f, tb);
    }
    CHECK(tb.tabu_list.size() == 2);
  }

  TEST_CASE("loop guards") {
    const auto inst = make_instance(Family::onemax, 200, {}, 1);
    const RunConfig cfg{5000, 50, 11, true};
    // once: every top-level pass is one generation of 50 FEs
    auto once = run(from_text("traverse | fork(2) | once; reset_n(0.01) | forward | once; "
                              "pairwise_select | forward | once"),
                    inst, cfg);
    CHECK(once.passes == 99);
    // count 5%: the block consumes at least 250 FEs per entry
    auto count = run(from_text("traverse | fork(2) | count(5%FE); reset_n(0.01) | forward | once; "
                               "pairwise_select | forward | once"),
                     inst, cfg);
    CHECK(count.passes == 20);
    CHECK(count.trace.size() == 20);
    auto count20 = run(from_text("traverse | fork(2) | count(20%FE); reset_n(0.01) | forward | once; "
                                 "pairwise_select | forward | once"),
                       inst, cfg);
    CHECK(count20.passes == 5);
    // iterate on a choose-only block spends nothing, so the loop exits and the run stops
    auto idle = run(from_text("traverse | iterate | count(20%FE)"), inst, cfg);
    CHECK(idle.fe_used == 50);
    CHECK(idle.passes == 1);
  }

  TEST_CASE("stagnation counts passes without improvement") {
    // d=1, P=1: after the first flip the best never improves again, so the
    // block exits on its third stale pass (3 or 4 FEs depending on the start)
    const auto inst = make_instance(Family::onemax, 1, {}, 1);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto rep = run(from_text("reset_n(0.01) | iterate | event(stagnation_3)"), inst, {100, 1, seed, true});
      CHECK(rep.fe_used == 100);
      CHECK(rep.passes >= 25);
      CHECK(rep.passes <= 33);
    }
  }

  TEST_CASE("property: FE conservation, monotone traces, determinism") {
    Rng rng(77);
    const std::vector<ProblemInstance> insts{make_instance(Family::onemax, 20, {}, 1),
                                             make_instance(Family::leadingones, 16, {}, 2),
                                             make_instance(Family::labs, 12, {}, 3),
                                             make_instance(Family::mivs, 25, {}, 4)};
    for (int trial = 0; trial < 300; ++trial) {
      const Program p = parse_tokens(testgen::random_tokens(rng, true));
      const auto& inst = insts[trial % insts.size()];
      const std::size_t pop = 1 + rng.below(12);
      const std::size_t budget = pop + rng.below(400);
      const RunConfig cfg{budget, pop, rng.next(), true};
      CAPTURE(to_text(p));
      const auto a = run(p, inst, cfg);
      CHECK(a.fe_used <= budget);
      if (has_component(p, Category::search)) CHECK(a.fe_used == budget);
      for (std::size_t k = 1; k < a.trace.size(); ++k) CHECK(a.trace[k] >= a.trace[k - 1]);
      CHECK(a.trace.size() == a.passes);
      CHECK(inst.evaluate(a.best_solution) == a.best_fitness);
      if (!a.trace.empty()) CHECK(a.trace.back() == a.best_fitness);
      const auto b = run(p, inst, cfg);
      CHECK(b.trace == a.trace);
      CHECK(b.best_solution == a.best_solution);
      CHECK(b.fe_used == a.fe_used);
    }
  }

  TEST_CASE("supplied initial population costs nothing") {
    const auto inst = make_instance(Family::onemax, 10, {}, 1);
    RunState st(inst, 1000, 3);
    Population init = random_population(st, 5);
    const auto rep = run(from_text("traverse | forward | once"), inst, {10, 5, 1, true}, &init);
    CHECK(rep.fe_used == 0);
    double best = -1;
    for (const auto& ind : init) best = std::max(best, ind.f);
    CHECK(rep.best_fitness == best);
    Population wrong(4, init[0]);
    CHECK_THROWS_AS(run(from_text("traverse | forward | once"), inst, {10, 5, 1, true}, &wrong),
                    std::invalid_argument);
  }

  TEST_CASE("a standard design solves onemax at d=100 in most seeds") {
    const auto inst = make_instance(Family::onemax, 100, {}, 1);
    const Program p = from_text(
        "roulette_wheel | fork(2) | count(5%FE); reset_n(0.01) | forward | once; pairwise_select | forward | once; "
        "roulette_wheel | fork(2) | count(5%FE); cross_uniform(0.7) | forward | once; "
        "pairwise_select | forward | once");
    int solved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) solved += run(p, inst, {5000, 50, seed, false}).best_fitness == 100;
    CHECK(solved >= 7);
  }
}
