#pragma once

// Executes a Program as a population-based search on a ProblemInstance under
// a function-evaluation (FE) budget.
//
// Dataflow: the run keeps the population S and an optional pending set N of
// evaluated offspring. choose rewrites S, search produces N from N (when
// pending) or S, select merges N into S and clears it. A block pass that ends
// with N still pending applies always_select.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "metagen/problems.hpp"
#include "metagen/program.hpp"
#include "metagen/rng.hpp"

namespace metagen {

struct Individual {
  BitString x;
  double f = 0.0;
};

using Population = std::vector<Individual>;

struct RunConfig {
  std::size_t budget = 5000;
  std::size_t pop_size = 50;
  std::uint64_t seed = 0;
  bool trace = true;
};

struct ExecutionReport {
  double best_fitness = 0.0;
  BitString best_solution;
  std::size_t fe_used = 0;
  std::size_t passes = 0;       // top-level passes
  std::vector<double> trace;    // best fitness after each top-level pass
};

// Mutable state of one run. Exposed so components can be exercised directly.
struct RunState {
  RunState(const ProblemInstance& instance, std::size_t budget, std::uint64_t seed)
      : instance(&instance), fe_budget(budget), rng(seed) {}

  const ProblemInstance* instance;
  std::size_t fe_used = 0;
  std::size_t fe_budget;
  Rng rng;
  Individual best{{}, -std::numeric_limits<double>::infinity()};

  Population population;
  Population pending;
  bool has_pending = false;
  double best_before_pending = 0.0;  // global best when the pending set was started

  std::optional<double> sa_temperature;
  std::deque<std::uint64_t> tabu_list;

  std::size_t dim() const { return instance->dim(); }
  bool budget_left() const { return fe_used < fe_budget; }
  // Evaluates x (1 FE) and updates the best-so-far.
  double evaluate(const BitString& x);
};

// Population-level component kernels.
Population exec_choose(Component kind, const Population& population, RunState& state);
// One offspring per working solution while budget remains.
Population exec_search(Component kind, std::span<const double> params, const Population& working,
                       RunState& state);
Population exec_select(Component kind, std::span<const double> params, const Population& old,
                       const Population& fresh, RunState& state);

std::size_t flips_for(double fraction, std::size_t d);       // reset_n / tabu sizing
std::size_t cut_points_for(double fraction, std::size_t d);  // cross_n
std::uint64_t solution_hash(std::span<const std::uint8_t> x);

// Throws std::invalid_argument when budget < pop_size, pop_size == 0, or the
// initial population has the wrong shape.
ExecutionReport run(const Program& program, const ProblemInstance& instance, const RunConfig& config,
                    const Population* initial_pop = nullptr);

// Random initial population: pop_size solutions of d rng.bit() draws each,
// evaluated in order.
Population random_population(RunState& state, std::size_t pop_size);

}  // namespace metagen
