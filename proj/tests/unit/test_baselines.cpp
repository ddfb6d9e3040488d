#include <doctest.h>

#include <string>

#include "metagen/baselines.hpp"
#include "metagen/rng.hpp"

using namespace metagen;

TEST_SUITE("baselines") {
  TEST_CASE("names") {
    for (BaselineKind k : kAllBaselines) CHECK(baseline_from_name(baseline_name(k)) == k);
    CHECK(baseline_from_name("ga") == BaselineKind::ga);
    CHECK_FALSE(baseline_from_name("pso").has_value());
  }

  TEST_CASE("canonical programs") {
    for (BaselineKind k : kAllBaselines)
      for (std::size_t d : {10, 100, 625}) {
        const Program p = as_program(k, d);
        CHECK(validate(p).empty());
        CHECK(to_text(from_text(to_text(p))) == to_text(p));
      }
    const Program sa = as_program(BaselineKind::sa, 100);
    REQUIRE(sa.snippets.size() == 3);
    CHECK(sa.snippets[2].component == Component::simulated_annealing_select);
    const Program ts = as_program(BaselineKind::ts, 100);
    CHECK(ts.snippets[2].component == Component::tabu);
    CHECK(flips_for(ts.snippets[2].params[0], 100) == 10);
    // single-bit neighbourhood at every size
    for (std::size_t d : {10, 50, 100, 149, 150, 625})
      CHECK(flips_for(as_program(BaselineKind::sa, d).snippets[1].params[0], d) == 1);
    // the 1/d form is off the token grid, the 0.01 form is on it
    CHECK(as_program(BaselineKind::ils, 100).source_tokens.size() > 0);
    CHECK(as_program(BaselineKind::ils, 625).source_tokens.empty());
    CHECK_THROWS_AS(as_program(BaselineKind::ga, 0), std::invalid_argument);
  }

  TEST_CASE("hand-coded and interpreted runs agree pass for pass") {
    for (BaselineKind k : kAllBaselines)
      for (const char* fam : {"onemax", "leadingones"})
        for (std::size_t d : {10, 20})
          for (std::uint64_t seed : {1u, 2u, 3u}) {
            const ProblemInstance inst = make_instance(parse_problem_key(std::string(fam) + ":" + std::to_string(d)),
                                                       std::nullopt, seed);
            const RunConfig rc{600, 20, derive_seed(seed, {d}), true};
            const auto a = run_handcoded(k, inst, rc);
            const auto b = run(as_program(k, d), inst, rc);
            CAPTURE(baseline_name(k));
            CAPTURE(fam);
            CAPTURE(d);
            CAPTURE(seed);
            CHECK(a.trace == b.trace);
            CHECK(a.fe_used == b.fe_used);
            CHECK(a.best_fitness == b.best_fitness);
            CHECK(a.best_solution == b.best_solution);
            CHECK(a.fe_used == 600);
          }
  }

  TEST_CASE("ga settings are honoured") {
    const ProblemInstance inst = make_instance(Family::onemax, 30, {}, 0);
    const GaSettings s{0.3, 0.1};
    const RunConfig rc{500, 10, 9, true};
    CHECK(run_handcoded(BaselineKind::ga, inst, rc, s).trace == run(as_program(BaselineKind::ga, 30, s), inst, rc).trace);
  }

  TEST_CASE("budgets are exact") {
    const ProblemInstance inst = make_instance(Family::leadingones, 15, {}, 0);
    for (BaselineKind k : kAllBaselines)
      for (std::size_t budget : {7u, 10u, 33u, 101u}) {
        const auto r = run_handcoded(k, inst, {budget, 7, 4, false});
        CHECK(r.fe_used == budget);
        CHECK(r.trace.empty());
      }
    CHECK_THROWS_AS(run_handcoded(BaselineKind::sa, inst, {5, 7, 4, false}), std::invalid_argument);
  }

  TEST_CASE("ga grid search is an argmax") {
    const ProblemInstance inst = make_instance(Family::onemax, 20, {}, 0);
    const auto g = ga_grid_search(inst, 200, 10, 5, 2);
    REQUIRE(g.table.size() == 27);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < g.table.size(); ++i)
      if (g.table[i].mean_best > g.table[arg].mean_best) arg = i;
    CHECK(g.best.crossover == g.table[arg].settings.crossover);
    CHECK(g.best.mutation == g.table[arg].settings.mutation);
    CHECK(g.best_mean == g.table[arg].mean_best);
    CHECK(g.table[0].settings.crossover == 0.1);
    CHECK(g.table[0].settings.mutation == doctest::Approx(1.0 / 20));
    CHECK(g.table[26].settings.mutation == doctest::Approx(5.0 / 20));
    // first entry recomputed
    double total = 0;
    for (std::size_t r = 0; r < 2; ++r)
      total += run_handcoded(BaselineKind::ga, inst, {200, 10, derive_seed(5, {r}), false}, g.table[0].settings)
                   .best_fitness;
    CHECK(g.table[0].mean_best == total / 2);
  }
}
