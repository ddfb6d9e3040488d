#pragma once

// Pseudo-Boolean benchmark objectives (maximization) over 0/1 byte strings,
// with optional W-model layers applied between the input and the base
// function.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metagen {

// One byte per bit, values 0/1.
using BitString = std::vector<std::uint8_t>;

enum class Family { onemax, leadingones, harmonic, labs, ising_ring, ising_torus, mivs, nqueens };

std::string_view family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);

struct WModelLayer {
  enum class Kind { dummy, neutrality, epistasis, ruggedness };
  Kind kind;
  std::size_t parameter;  // m, mu, nu or gamma

  bool operator==(const WModelLayer&) const = default;
};

std::string layer_name(const WModelLayer& layer);

using Graph = std::vector<std::vector<std::size_t>>;  // adjacency lists

class ProblemInstance {
 public:
  Family family() const { return family_; }
  std::size_t dim() const { return dim_; }
  // Length seen by the base function after the bit-level layers.
  std::size_t working_length() const { return working_; }
  const std::vector<WModelLayer>& layers() const { return layers_; }
  const std::optional<double>& known_optimum() const { return known_optimum_; }
  const Graph& graph() const { return graph_; }
  std::uint64_t seed() const { return seed_; }
  // Canonical registry key, e.g. "onemax:120+neutrality3".
  std::string key() const;

  // Throws std::invalid_argument on length mismatch.
  double evaluate(std::span<const std::uint8_t> x) const;

  // Base objective on an already-transformed working string.
  double evaluate_base(std::span<const std::uint8_t> w) const;

 private:
  friend ProblemInstance make_instance(Family, std::size_t, std::vector<WModelLayer>, std::uint64_t);
  friend ProblemInstance make_mivs_instance(Graph graph);

  Family family_ = Family::onemax;
  std::size_t dim_ = 0;
  std::size_t working_ = 0;
  std::vector<WModelLayer> layers_;
  std::optional<double> known_optimum_;
  Graph graph_;
  std::uint64_t seed_ = 0;
  std::size_t board_ = 0;  // n for nqueens / ising_torus
  // per-layer precomputation, aligned with layers_
  std::vector<std::vector<std::size_t>> dummy_positions_;
  std::vector<std::vector<std::uint16_t>> epistasis_tables_;
  long long ruggedness_max_ = 0;
};

// Throws std::invalid_argument for an invalid family/dimension/layer combination.
ProblemInstance make_instance(Family family, std::size_t d, std::vector<WModelLayer> layers,
                              std::uint64_t seed);

// MIVS over an explicit graph (no layers).
ProblemInstance make_mivs_instance(Graph graph);

// W-model layers as standalone transforms.
std::vector<std::size_t> dummy_positions(std::size_t d, std::size_t m, std::uint64_t seed);
BitString apply_dummy(std::span<const std::uint8_t> x, std::size_t m, std::uint64_t seed);
BitString apply_neutrality(std::span<const std::uint8_t> x, std::size_t mu);
std::vector<std::uint16_t> epistasis_table(std::size_t nu, std::uint64_t seed);
BitString apply_epistasis(std::span<const std::uint8_t> x, std::size_t nu, std::uint64_t seed);
long long apply_ruggedness(long long f, std::size_t gamma, long long f_max);

// Registry key: family[:dim][+layer...], the dimension may also follow a
// layer ("onemax+neutrality3:120"). Layers: dummyM, neutralityMU,
// epistasisNU, ruggednessGAMMA.
struct ProblemKey {
  Family family = Family::onemax;
  std::optional<std::size_t> dim;
  std::vector<WModelLayer> layers;

  std::string str() const;
};

ProblemKey parse_problem_key(std::string_view key);

// Instance from a key; `default_dim` is used when the key has no dimension.
ProblemInstance make_instance(const ProblemKey& key, std::optional<std::size_t> default_dim,
                              std::uint64_t seed);

}  // namespace metagen
