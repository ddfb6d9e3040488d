#pragma once

// Exploratory landscape analysis: a fixed 32-entry factor vector computed from
// random-walk samples, used to embed a problem as a policy input.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "metagen/problems.hpp"

namespace metagen {

inline constexpr std::size_t kNumFactors = 32;

// Factor names in their fixed order.
std::span<const std::string_view> factor_names();

// Any pseudo-Boolean objective; lets tests use flat or random landscapes.
struct Objective {
  std::size_t dim = 0;
  std::function<double(std::span<const std::uint8_t>)> f;
};

Objective objective_of(const ProblemInstance& instance);

struct WalkSample {
  std::vector<BitString> points;
  std::vector<double> fitness;
  std::uint64_t seed = 0;
};

// 100·d points, uniform start, one uniformly chosen bit flipped per step.
WalkSample random_walk_sample(const Objective& objective, std::uint64_t seed);

// Each group returns its values in factor order. `seed` drives subsampling.
std::array<double, 10> dispersion_features(const WalkSample& sample, std::size_t d, std::uint64_t seed);

struct MetaModelResult {
  std::array<double, 10> values{};
  bool ridge_used = false;  // some design was rank deficient
};
MetaModelResult meta_model_features(const WalkSample& sample, std::size_t d, std::uint64_t seed);

std::array<double, 6> info_content_features(const WalkSample& sample);
std::array<double, 6> nbc_features(const WalkSample& sample, std::size_t d, std::uint64_t seed);

// Information-content helpers on a fitness sequence.
double ic_entropy(std::span<const double> fitness, double eps);
double ic_partial_information(std::span<const double> fitness, double eps);
std::span<const double> ic_epsilon_grid();

struct FactorVector {
  std::array<double, kNumFactors> values{};
  bool ridge_used = false;

  double operator[](std::string_view name) const;
};

// All 32 factors of one walk.
FactorVector factors_of_walk(const WalkSample& sample, std::size_t d, std::uint64_t seed);

struct LandscapeAnalysis {
  FactorVector factors;            // mean over the trials
  std::vector<WalkSample> walks;   // one per trial, kept for reuse
};

inline constexpr std::size_t kLandscapeTrials = 5;

LandscapeAnalysis analyze(const Objective& objective, std::uint64_t master_seed,
                          std::size_t trials = kLandscapeTrials);
FactorVector compute_factors(const ProblemInstance& instance, std::uint64_t master_seed);

}  // namespace metagen
