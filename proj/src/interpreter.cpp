#include "metagen/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "metagen/simd/kernels.hpp"

namespace metagen {
namespace {

double max_fitness(const Population& p) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& ind : p) m = std::max(m, ind.f);
  return m;
}

std::size_t binary_tournament(const Population& p, Rng& rng) {
  const std::size_t a = rng.below(p.size());
  const std::size_t b = rng.below(p.size());
  return p[a].f >= p[b].f ? a : b;
}

std::size_t pick_mate(std::size_t i, std::size_t n, Rng& rng) {
  if (n < 2) return i;
  std::size_t j = rng.below(n - 1);
  if (j >= i) ++j;
  return j;
}

// First k entries of a random permutation of `pool` (partial Fisher-Yates).
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
}

Population choose_roulette(const Population& s, Rng& rng) {
  double lo = s[0].f, hi = s[0].f;
  for (const auto& ind : s) {
    lo = std::min(lo, ind.f);
    hi = std::max(hi, ind.f);
  }
  Population out;
  out.reserve(s.size());
  if (hi == lo) {
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[rng.below(s.size())]);
    return out;
  }
  const double delta = 1e-9 * std::max(1.0, hi - lo);
  std::vector<double> cum(s.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) cum[i] = acc += s[i].f - lo + delta;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    out.push_back(s[std::min<std::size_t>(it - cum.begin(), s.size() - 1)]);
  }
  return out;
}

Population choose_nich(const Population& s, RunState& st) {
  const std::size_t d = st.dim();
  const std::size_t radius = (d + 9) / 10;
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a].f > s[b].f; });
  std::vector<std::size_t> leaders;
  for (std::size_t i : order) {
    bool covered = false;
    for (std::size_t l : leaders)
      if (simd::hamming(s[i].x, s[l].x) <= radius) {
        covered = true;
        break;
      }
    if (!covered) leaders.push_back(i);
  }
  Population out;
  out.reserve(s.size());
  for (std::size_t l : leaders) out.push_back(s[l]);
  while (out.size() < s.size()) out.push_back(s[binary_tournament(s, st.rng)]);
  return out;
}

// Pairwise replacement; `accept(i)` decides whether fresh[i] replaces old[i].
template <class Accept>
Population pairwise_with(const Population& old, const Population& fresh, Accept accept) {
  Population out = old;
  const std::size_t n = std::min(old.size(), fresh.size());
  for (std::size_t i = 0; i < n; ++i)
    if (accept(i)) out[i] = fresh[i];
  return out;
}

Population select_sa(const Population& old, const Population& fresh, RunState& st) {
  const std::size_t n = std::min(old.size(), fresh.size());
  if (!st.sa_temperature) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (fresh[i].f < old[i].f) {
        sum += old[i].f - fresh[i].f;
        ++count;
      }
    if (count > 0) st.sa_temperature = (sum / static_cast<double>(count)) / -std::log(0.8);
  }
  Population out = pairwise_with(old, fresh, [&](std::size_t i) {
    if (fresh[i].f >= old[i].f) return true;
    const double delta = old[i].f - fresh[i].f;
    return st.rng.uniform() < std::exp(-delta / *st.sa_temperature);
  });
  if (st.sa_temperature) *st.sa_temperature *= 0.995;
  return out;
}

Population select_tabu(const Population& old, const Population& fresh, double fraction, RunState& st) {
  const std::size_t capacity = flips_for(fraction, st.dim());
  return pairwise_with(old, fresh, [&](std::size_t i) {
    const std::uint64_t h = solution_hash(fresh[i].x);
    const bool tabu = std::find(st.tabu_list.begin(), st.tabu_list.end(), h) != st.tabu_list.end();
    if (tabu && !(fresh[i].f > st.best_before_pending)) return false;
    if (fresh[i].f < old[i].f) return false;
    st.tabu_list.push_back(h);
    while (st.tabu_list.size() > capacity) st.tabu_list.pop_front();
    return true;
  });
}

Population top_by(const Population& combined, const std::vector<double>& score, std::size_t keep) {
  std::vector<std::size_t> order(combined.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  Population out;
  out.reserve(keep);
  for (std::size_t k = 0; k < keep && k < order.size(); ++k) out.push_back(combined[order[k]]);
  return out;
}

}  // namespace

double RunState::evaluate(const BitString& x) {
  const double f = instance->evaluate(x);
  ++fe_used;
  if (f > best.f) best = {x, f};
  return f;
}

std::size_t flips_for(double fraction, std::size_t d) {
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d)));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(d, 1));
}

std::size_t cut_points_for(double fraction, std::size_t d) {
  if (d < 2) return 0;
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d)));
  return std::clamp<std::size_t>(n, 1, d - 1);
}

std::uint64_t solution_hash(std::span<const std::uint8_t> x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : x) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

Population exec_choose(Component kind, const Population& s, RunState& st) {
  if (s.empty()) return s;
  switch (kind) {
    case Component::traverse:
      return s;
    case Component::roulette_wheel:
      return choose_roulette(s, st.rng);
    case Component::tournament: {
      Population out;
      out.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[binary_tournament(s, st.rng)]);
      return out;
    }
    case Component::nich:
      return choose_nich(s, st);
    default:
      throw std::invalid_argument("not a choose component");
  }
}

Population exec_search(Component kind, std::span<const double> params, const Population& working,
                       RunState& st) {
  if (describe(kind).category != Category::search) throw std::invalid_argument("not a search component");
  const std::size_t d = st.dim();
  Population out;
  out.reserve(working.size());
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < working.size() && st.budget_left(); ++i) {
    BitString y = working[i].x;
    switch (kind) {
      case Component::reset_n: {
        const std::size_t n = flips_for(params[0], d);
        if (n == 1) {
          y[st.rng.below(d)] ^= 1;
        } else {
          pool.resize(d);
          std::iota(pool.begin(), pool.end(), 0);
          partial_shuffle(pool, n, st.rng);
          for (std::size_t k = 0; k < n; ++k) y[pool[k]] ^= 1;
        }
        break;
      }
      case Component::reset_rand:
      case Component::reset_creep:
        for (auto& b : y)
          if (st.rng.uniform() < params[0]) b ^= 1;
        break;
      case Component::cross_n: {
        const BitString& mate = working[pick_mate(i, working.size(), st.rng)].x;
        const std::size_t n = cut_points_for(params[0], d);
        if (n == 0) break;
        pool.resize(d - 1);
        std::iota(pool.begin(), pool.end(), 1);
        partial_shuffle(pool, n, st.rng);
        std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
        bool from_mate = false;
        std::size_t next_cut = 0;
        for (std::size_t pos = 0; pos < d; ++pos) {
          while (next_cut < n && pool[next_cut] == pos) {
            from_mate = !from_mate;
            ++next_cut;
          }
          if (from_mate) y[pos] = mate[pos];
        }
        break;
      }
      case Component::cross_uniform: {
        const BitString& mate = working[pick_mate(i, working.size(), st.rng)].x;
        for (std::size_t pos = 0; pos < d; ++pos)
          if (st.rng.uniform() < params[0]) y[pos] = mate[pos];
        break;
      }
      case Component::reinitialize:
        for (auto& b : y) b = st.rng.bit() ? 1 : 0;
        break;
      default:
        break;
    }
    const double f = st.evaluate(y);
    out.push_back({std::move(y), f});
  }
  return out;
}

Population exec_select(Component kind, std::span<const double> params, const Population& old,
                       const Population& fresh, RunState& st) {
  switch (kind) {
    case Component::greedy_select: {
      Population combined = fresh;
      combined.insert(combined.end(), old.begin(), old.end());
      std::vector<double> score(combined.size());
      for (std::size_t i = 0; i < combined.size(); ++i) score[i] = combined[i].f;
      return top_by(combined, score, old.size());
    }
    case Component::pairwise_select:
      return pairwise_with(old, fresh, [&](std::size_t i) { return fresh[i].f >= old[i].f; });
    case Component::round_robin_select: {
      Population combined = fresh;
      combined.insert(combined.end(), old.begin(), old.end());
      std::vector<double> wins(combined.size(), 0.0);
      for (std::size_t i = 0; i < combined.size(); ++i)
        for (int q = 0; q < 10; ++q)
          if (combined[i].f >= combined[st.rng.below(combined.size())].f) wins[i] += 1.0;
      return top_by(combined, wins, old.size());
    }
    case Component::simulated_annealing_select:
      return select_sa(old, fresh, st);
    case Component::tabu:
      return select_tabu(old, fresh, params[0], st);
    case Component::always_select: {
      Population out = fresh;
      for (std::size_t i = fresh.size(); i < old.size(); ++i) out.push_back(old[i]);
      if (out.size() > old.size() && !old.empty()) out.resize(old.size());
      return out;
    }
    default:
      throw std::invalid_argument("not a select component");
  }
}

Population random_population(RunState& st, std::size_t pop_size) {
  Population p;
  p.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) {
    BitString x(st.dim());
    for (auto& b : x) b = st.rng.bit() ? 1 : 0;
    const double f = st.evaluate(x);
    p.push_back({std::move(x), f});
  }
  return p;
}

namespace {

class Executor {
 public:
  Executor(const Program& program, RunState& st) : program_(program), st_(st) {}

  void pass(const Block& block) {
    std::size_t i = block.first, c = 0;
    while (i <= block.last) {
      if (c < block.children.size() && block.children[c].first == i) {
        loop(block.children[c]);
        i = block.children[c].last + 1;
        ++c;
        continue;
      }
      step(program_.snippets[i]);
      ++i;
    }
    flush();
  }

 private:
  void loop(const Block& block) {
    const Condition& guard = *block.guard;
    const std::size_t entry_fe = st_.fe_used;
    double reference = max_fitness(st_.population);
    int stale = 0;
    while (true) {
      const std::size_t pass_fe = st_.fe_used;
      const double pass_best = max_fitness(st_.population);
      pass(block);
      const double now = max_fitness(st_.population);
      if (!st_.budget_left() || st_.fe_used == pass_fe) return;
      switch (guard.kind) {
        case ConditionKind::once:
          return;
        case ConditionKind::count_frac:
          if (static_cast<double>(st_.fe_used - entry_fe) >= guard.fraction * static_cast<double>(st_.fe_budget))
            return;
          break;
        case ConditionKind::event:
          if (guard.event == EventKind::local_optimal) {
            if (!(now > pass_best)) return;
          } else {
            if (now > reference) {
              reference = now;
              stale = 0;
            } else if (++stale >= 3) {
              return;
            }
          }
          break;
      }
    }
  }

  void step(const Snippet& s) {
    switch (describe(s.component).category) {
      case Category::choose:
        st_.population = exec_choose(s.component, st_.population, st_);
        break;
      case Category::search: {
        if (!st_.has_pending) st_.best_before_pending = st_.best.f;
        const Population& src = st_.has_pending ? st_.pending : st_.population;
        Population next = exec_search(s.component, s.params, src, st_);
        st_.pending = std::move(next);
        st_.has_pending = true;
        break;
      }
      case Category::select:
        if (!st_.has_pending) break;
        st_.population = exec_select(s.component, s.params, st_.population, st_.pending, st_);
        st_.pending.clear();
        st_.has_pending = false;
        break;
    }
  }

  void flush() {
    if (!st_.has_pending) return;
    st_.population = exec_select(Component::always_select, {}, st_.population, st_.pending, st_);
    st_.pending.clear();
    st_.has_pending = false;
  }

  const Program& program_;
  RunState& st_;
};

}  // namespace

ExecutionReport run(const Program& program, const ProblemInstance& instance, const RunConfig& config,
                    const Population* initial_pop) {
  if (config.pop_size == 0) throw std::invalid_argument("pop_size must be positive");
  if (config.budget < config.pop_size)
    throw std::invalid_argument("budget (" + std::to_string(config.budget) + ") < pop_size (" +
                                std::to_string(config.pop_size) + ")");
  if (program.snippets.empty()) throw std::invalid_argument("empty program");
  RunState st(instance, config.budget, config.seed);
  if (initial_pop) {
    if (initial_pop->size() != config.pop_size) throw std::invalid_argument("initial population size mismatch");
    for (const auto& ind : *initial_pop) {
      if (ind.x.size() != instance.dim()) throw std::invalid_argument("initial population length mismatch");
      if (ind.f > st.best.f) st.best = ind;
    }
    st.population = *initial_pop;
  } else {
    st.population = random_population(st, config.pop_size);
  }

  ExecutionReport report;
  const Block root = control_flow(program);
  Executor exec(program, st);
  while (st.budget_left()) {
    const std::size_t before = st.fe_used;
    exec.pass(root);
    ++report.passes;
    if (config.trace) report.trace.push_back(st.best.f);
    if (st.fe_used == before) break;
  }
  report.best_fitness = st.best.f;
  report.best_solution = st.best.x;
  report.fe_used = st.fe_used;
  return report;
}

}  // namespace metagen
