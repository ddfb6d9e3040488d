#pragma once

// Human-designed baselines (ILS, SA, TS, GA) as canonical programs and as
// standalone hand-written runners that consume the RNG stream in the same
// order as the interpreter.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "metagen/interpreter.hpp"
#include "metagen/problems.hpp"
#include "metagen/program.hpp"

namespace metagen {

enum class BaselineKind { ils, sa, ts, ga };

inline constexpr BaselineKind kAllBaselines[] = {BaselineKind::ils, BaselineKind::sa, BaselineKind::ts,
                                                 BaselineKind::ga};

std::string_view baseline_name(BaselineKind kind);
std::optional<BaselineKind> baseline_from_name(std::string_view name);

struct GaSettings {
  double crossover = 0.9;  // uniform crossover rate
  double mutation = -1.0;  // per-bit flip probability; negative means 1/d
};

// Neighbourhood of ILS/SA/TS is a single bit flip: reset_n(0.01) while that
// rounds to one bit, otherwise reset_n(1/d), which is off the token grid.
Program as_program(BaselineKind kind, std::size_t d, GaSettings ga = {});

ExecutionReport run_handcoded(BaselineKind kind, const ProblemInstance& instance, const RunConfig& config,
                              GaSettings ga = {});

struct GaGridEntry {
  GaSettings settings;
  double mean_best = 0.0;
};

struct GaGridResult {
  GaSettings best;
  double best_mean = 0.0;
  std::vector<GaGridEntry> table;
};

// η_c ∈ {0.1, ..., 0.9} x η_m ∈ {1/d, 2/d, 5/d}, `seeds` runs each; ties keep
// the earlier grid entry.
GaGridResult ga_grid_search(const ProblemInstance& instance, std::size_t budget, std::size_t pop_size,
                            std::uint64_t seed, std::size_t seeds = 5);

}  // namespace metagen
