#include "metagen/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "metagen/rng.hpp"

namespace metagen {
namespace {

double mutation_rate(const GaSettings& ga, std::size_t d) {
  return ga.mutation < 0.0 ? 1.0 / static_cast<double>(d) : ga.mutation;
}

double flip_fraction(std::size_t d) {
  return std::llround(0.01 * static_cast<double>(d)) <= 1 ? 0.01 : 1.0 / static_cast<double>(d);
}

struct Sol {
  BitString x;
  double f;
};

// Shared bookkeeping of a hand-coded run.
struct Ctx {
  Ctx(const ProblemInstance& i, std::size_t b, std::uint64_t seed) : inst(i), budget(b), rng(seed) {}

  const ProblemInstance& inst;
  std::size_t budget;
  Rng rng;
  std::size_t fe = 0;
  double best = -std::numeric_limits<double>::infinity();
  BitString best_x;

  double eval(const BitString& x) {
    const double f = inst.evaluate(x);
    ++fe;
    if (f > best) {
      best = f;
      best_x = x;
    }
    return f;
  }
  BitString random_bits() {
    BitString x(inst.dim());
    for (auto& b : x) b = rng.bit() ? 1 : 0;
    return x;
  }
};

std::vector<Sol> init_population(Ctx& c, std::size_t pop) {
  std::vector<Sol> s;
  for (std::size_t i = 0; i < pop; ++i) {
    BitString x = c.random_bits();
    const double f = c.eval(x);
    s.push_back({std::move(x), f});
  }
  return s;
}

// One single-bit-flip neighbour per member while budget remains.
std::vector<Sol> flip_neighbours(Ctx& c, const std::vector<Sol>& s) {
  std::vector<Sol> out;
  for (const Sol& p : s) {
    if (c.fe >= c.budget) break;
    BitString y = p.x;
    y[c.rng.below(y.size())] ^= 1;
    const double f = c.eval(y);
    out.push_back({std::move(y), f});
  }
  return out;
}

double best_of(const std::vector<Sol>& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (const Sol& p : s) m = std::max(m, p.f);
  return m;
}

std::uint64_t fnv1a(const BitString& x) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : x) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

ExecutionReport finish(const Ctx& c, std::vector<double> trace, std::size_t passes, bool keep_trace) {
  ExecutionReport r;
  r.best_fitness = c.best;
  r.best_solution = c.best_x;
  r.fe_used = c.fe;
  r.passes = passes;
  if (keep_trace) r.trace = std::move(trace);
  return r;
}

// Iterated local search: hill-climb until three passes without improving the
// population best, then restart the whole population at random.
ExecutionReport ils(Ctx& c, const RunConfig& cfg) {
  auto pop = init_population(c, cfg.pop_size);
  std::vector<double> trace;
  std::size_t passes = 0;
  while (c.fe < c.budget) {
    const std::size_t start = c.fe;
    double reference = best_of(pop);
    int stale = 0;
    while (true) {
      const std::size_t before = c.fe;
      auto next = flip_neighbours(c, pop);
      for (std::size_t i = 0; i < next.size(); ++i)
        if (next[i].f >= pop[i].f) pop[i] = next[i];
      const double now = best_of(pop);
      if (c.fe >= c.budget || c.fe == before) break;
      if (now > reference) {
        reference = now;
        stale = 0;
      } else if (++stale >= 3) {
        break;
      }
    }
    for (std::size_t i = 0; i < pop.size() && c.fe < c.budget; ++i) {
      BitString x = c.random_bits();
      const double f = c.eval(x);
      pop[i] = {std::move(x), f};
    }
    ++passes;
    trace.push_back(c.best);
    if (c.fe == start) break;
  }
  return finish(c, std::move(trace), passes, cfg.trace);
}

ExecutionReport sa(Ctx& c, const RunConfig& cfg) {
  auto pop = init_population(c, cfg.pop_size);
  std::vector<double> trace;
  std::size_t passes = 0;
  double temperature = 0.0;
  bool calibrated = false;
  while (c.fe < c.budget) {
    const std::size_t start = c.fe;
    auto next = flip_neighbours(c, pop);
    if (!calibrated) {
      double worse_sum = 0.0;
      int worse = 0;
      for (std::size_t i = 0; i < next.size(); ++i)
        if (next[i].f < pop[i].f) {
          worse_sum += pop[i].f - next[i].f;
          ++worse;
        }
      if (worse > 0) {
        temperature = worse_sum / worse / -std::log(0.8);
        calibrated = true;
      }
    }
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (next[i].f >= pop[i].f) {
        pop[i] = next[i];
        continue;
      }
      if (c.rng.uniform() < std::exp(-(pop[i].f - next[i].f) / temperature)) pop[i] = next[i];
    }
    if (calibrated) temperature *= 0.995;
    ++passes;
    trace.push_back(c.best);
    if (c.fe == start) break;
  }
  return finish(c, std::move(trace), passes, cfg.trace);
}

ExecutionReport ts(Ctx& c, const RunConfig& cfg) {
  auto pop = init_population(c, cfg.pop_size);
  const std::size_t d = c.inst.dim();
  const std::size_t capacity = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(d))));
  std::deque<std::uint64_t> tabu;
  std::vector<double> trace;
  std::size_t passes = 0;
  while (c.fe < c.budget) {
    const std::size_t start = c.fe;
    const double aspiration = c.best;
    auto next = flip_neighbours(c, pop);
    for (std::size_t i = 0; i < next.size(); ++i) {
      const std::uint64_t h = fnv1a(next[i].x);
      const bool is_tabu = std::find(tabu.begin(), tabu.end(), h) != tabu.end();
      if (is_tabu && next[i].f <= aspiration) continue;
      if (next[i].f < pop[i].f) continue;
      pop[i] = next[i];
      tabu.push_back(h);
      if (tabu.size() > capacity) tabu.pop_front();
    }
    ++passes;
    trace.push_back(c.best);
    if (c.fe == start) break;
  }
  return finish(c, std::move(trace), passes, cfg.trace);
}

ExecutionReport ga(Ctx& c, const RunConfig& cfg, const GaSettings& settings) {
  auto pop = init_population(c, cfg.pop_size);
  const std::size_t d = c.inst.dim();
  const double pc = settings.crossover, pm = mutation_rate(settings, d);
  std::vector<double> trace;
  std::size_t passes = 0;
  while (c.fe < c.budget) {
    const std::size_t start = c.fe;
    // binary tournaments, the first contestant wins ties
    std::vector<Sol> parents;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const std::size_t a = c.rng.below(pop.size());
      const std::size_t b = c.rng.below(pop.size());
      parents.push_back(pop[a].f >= pop[b].f ? pop[a] : pop[b]);
    }
    // uniform crossover with a different random parent
    std::vector<Sol> children;
    for (std::size_t i = 0; i < parents.size() && c.fe < c.budget; ++i) {
      std::size_t j = i;
      if (parents.size() > 1) {
        j = c.rng.below(parents.size() - 1);
        if (j >= i) ++j;
      }
      BitString y = parents[i].x;
      for (std::size_t k = 0; k < d; ++k)
        if (c.rng.uniform() < pc) y[k] = parents[j].x[k];
      const double f = c.eval(y);
      children.push_back({std::move(y), f});
    }
    // bitwise mutation of the children
    std::vector<Sol> mutants;
    for (std::size_t i = 0; i < children.size() && c.fe < c.budget; ++i) {
      BitString y = children[i].x;
      for (auto& bit : y)
        if (c.rng.uniform() < pm) bit ^= 1;
      const double f = c.eval(y);
      mutants.push_back({std::move(y), f});
    }
    pop = parents;
    for (std::size_t i = 0; i < mutants.size(); ++i)
      if (mutants[i].f >= pop[i].f) pop[i] = mutants[i];
    ++passes;
    trace.push_back(c.best);
    if (c.fe == start) break;
  }
  return finish(c, std::move(trace), passes, cfg.trace);
}

}  // namespace

std::string_view baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::ils:
      return "ILS";
    case BaselineKind::sa:
      return "SA";
    case BaselineKind::ts:
      return "TS";
    case BaselineKind::ga:
      return "GA";
  }
  return "?";
}

std::optional<BaselineKind> baseline_from_name(std::string_view name) {
  for (BaselineKind k : kAllBaselines) {
    const auto n = baseline_name(k);
    if (n.size() == name.size() &&
        std::equal(n.begin(), n.end(), name.begin(), [](char a, char b) { return a == std::toupper(b); }))
      return k;
  }
  return std::nullopt;
}

Program as_program(BaselineKind kind, std::size_t d, GaSettings ga) {
  if (d == 0) throw std::invalid_argument("dimension must be positive");
  const double flip = flip_fraction(d);
  auto snip = [](Component c, std::vector<double> p, Pointer ptr = Pointer::forward(),
                 Condition cond = Condition::once()) { return Snippet{c, std::move(p), ptr, cond}; };
  switch (kind) {
    case BaselineKind::ils:
      return make_program({snip(Component::traverse, {}, Pointer::fork(2), Condition::on(EventKind::stagnation_3)),
                           snip(Component::reset_n, {flip}), snip(Component::pairwise_select, {}),
                           snip(Component::reinitialize, {})});
    case BaselineKind::sa:
      return make_program({snip(Component::traverse, {}), snip(Component::reset_n, {flip}),
                           snip(Component::simulated_annealing_select, {})});
    case BaselineKind::ts:
      return make_program(
          {snip(Component::traverse, {}), snip(Component::reset_n, {flip}), snip(Component::tabu, {0.1})});
    case BaselineKind::ga:
      return make_program({snip(Component::tournament, {}), snip(Component::cross_uniform, {ga.crossover}),
                           snip(Component::reset_rand, {mutation_rate(ga, d)}),
                           snip(Component::pairwise_select, {})});
  }
  throw std::invalid_argument("unknown baseline");
}

ExecutionReport run_handcoded(BaselineKind kind, const ProblemInstance& instance, const RunConfig& config,
                              GaSettings settings) {
  if (config.pop_size == 0 || config.budget < config.pop_size)
    throw std::invalid_argument("budget must be >= pop_size > 0");
  Ctx c(instance, config.budget, config.seed);
  switch (kind) {
    case BaselineKind::ils:
      return ils(c, config);
    case BaselineKind::sa:
      return sa(c, config);
    case BaselineKind::ts:
      return ts(c, config);
    case BaselineKind::ga:
      return ga(c, config, settings);
  }
  throw std::invalid_argument("unknown baseline");
}

GaGridResult ga_grid_search(const ProblemInstance& instance, std::size_t budget, std::size_t pop_size,
                            std::uint64_t seed, std::size_t seeds) {
  const double d = static_cast<double>(instance.dim());
  GaGridResult out;
  bool first = true;
  for (int c = 1; c <= 9; ++c)
    for (double m : {1.0 / d, 2.0 / d, 5.0 / d}) {
      const GaSettings s{c / 10.0, std::min(1.0, m)};
      double total = 0.0;
      for (std::size_t r = 0; r < seeds; ++r)
        total += run_handcoded(BaselineKind::ga, instance, {budget, pop_size, derive_seed(seed, {r}), false}, s)
                     .best_fitness;
      const double mean = total / static_cast<double>(seeds);
      out.table.push_back({s, mean});
      if (first || mean > out.best_mean) {
        out.best = s;
        out.best_mean = mean;
        first = false;
      }
    }
  return out;
}

}  // namespace metagen
