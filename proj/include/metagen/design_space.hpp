#pragma once

// Token vocabulary and grammar of the algorithm design space.
//
// A program is a sequence of snippets
//   component [param...] pointer [fork-offset] condition
// bracketed by `begin` ... `end`. The grammar is a small deterministic state
// machine; next_mask() tells the sampler which tokens are legal next.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metagen {

using TokenId = std::uint16_t;

enum class Category { choose, search, select };
enum class ParamKind { n_grid, p_grid };

enum class Component : std::uint8_t {
  traverse,
  roulette_wheel,
  tournament,
  nich,
  reset_n,
  reset_rand,
  reset_creep,
  cross_n,
  cross_uniform,
  reinitialize,
  greedy_select,
  pairwise_select,
  round_robin_select,
  simulated_annealing_select,
  tabu,
  always_select,
};

inline constexpr std::size_t kNumComponents = 16;
inline constexpr std::size_t kMaxComponents = 6;
inline constexpr std::size_t kMaxForkOffset = 5;

struct ComponentDescriptor {
  Component id;
  std::string_view name;
  Category category;
  std::span<const ParamKind> param_kinds;  // hyperparameter count C = size()
};

const ComponentDescriptor& describe(Component c);
std::span<const ComponentDescriptor> all_components();
std::optional<Component> component_from_name(std::string_view name);

enum class PointerKind { forward, iterate, fork };
enum class ConditionKind { once, count_frac, event };
enum class EventKind { local_optimal, stagnation_3 };

std::string_view pointer_name(PointerKind p);
std::string_view event_name(EventKind e);
std::optional<EventKind> event_from_name(std::string_view name);

// Hyperparameter grids (fractions of d for n, probabilities for p).
inline constexpr std::array<double, 10> kNGrid{0.01, 0.05, 0.10, 0.15, 0.20,
                                               0.25, 0.30, 0.35, 0.40, 0.45};
inline constexpr std::array<double, 10> kPGrid{0.1, 0.2, 0.3, 0.4, 0.5,
                                               0.6, 0.7, 0.8, 0.9, 1.0};
// Count conditions as fractions of the run's FE budget.
inline constexpr std::array<double, 5> kCountGrid{0.01, 0.05, 0.10, 0.15, 0.20};
inline constexpr std::array<int, 5> kCountPercent{1, 5, 10, 15, 20};

std::span<const double> grid_values(ParamKind kind);
std::optional<std::size_t> grid_index(ParamKind kind, double value);
std::optional<std::size_t> count_index(double fraction);

enum class TokenKind { component, n_value, p_value, pointer, fork_offset, condition, begin, end };

namespace tok {
inline constexpr TokenId kComponentBase = 0;
inline constexpr TokenId kNGridBase = 16;
inline constexpr TokenId kPGridBase = 26;
inline constexpr TokenId kPointerBase = 36;
inline constexpr TokenId kForkOffsetBase = 39;  // offset k -> base + k - 1
inline constexpr TokenId kCountBase = 44;
inline constexpr TokenId kOnce = 49;
inline constexpr TokenId kEventBase = 50;
inline constexpr TokenId kBegin = 52;
inline constexpr TokenId kEnd = 53;
}  // namespace tok

inline constexpr std::size_t kVocabSize = 54;

struct TokenInfo {
  TokenId id;
  TokenKind kind;
  std::string name;
  // component index, grid value, pointer index, fork offset, count fraction,
  // or event index depending on kind; 0 for once/begin/end
  double value;
};

class Vocabulary {
 public:
  std::size_t size() const { return tokens_.size(); }
  const TokenInfo& info(TokenId id) const { return tokens_.at(id); }
  std::span<const TokenInfo> tokens() const { return tokens_; }
  std::optional<TokenId> find(std::string_view name) const;

  static TokenId component(Component c) { return tok::kComponentBase + static_cast<TokenId>(c); }
  static TokenId grid(ParamKind kind, std::size_t index);
  static TokenId pointer(PointerKind p) { return tok::kPointerBase + static_cast<TokenId>(p); }
  static TokenId fork_offset(std::size_t k);
  static TokenId count(std::size_t index) { return tok::kCountBase + static_cast<TokenId>(index); }
  static TokenId event(EventKind e) { return tok::kEventBase + static_cast<TokenId>(e); }

 private:
  friend const Vocabulary& build_vocabulary();
  Vocabulary();
  std::vector<TokenInfo> tokens_;
};

// Fixed 54-token vocabulary; built once, immutable afterwards.
const Vocabulary& build_vocabulary();

struct MaskVector {
  std::array<bool, kVocabSize> allowed{};

  bool operator[](TokenId id) const { return allowed[id]; }
  std::size_t count() const;
  std::vector<TokenId> allowed_tokens() const;
};

enum class Phase { expect_component, expect_param, expect_pointer, expect_fork_offset,
                   expect_condition, done };

std::string_view phase_name(Phase p);

struct GrammarState {
  Phase phase = Phase::expect_component;
  std::size_t param_index = 0;
  std::size_t components_emitted = 0;
  std::size_t snippets_emitted = 0;
  std::optional<PointerKind> last_pointer;
  std::optional<Component> current;

  bool operator==(const GrammarState&) const = default;
};

class GrammarError : public std::runtime_error {
 public:
  GrammarError(Phase phase, TokenId token, const std::string& what)
      : std::runtime_error(what), phase_(phase), token_(token) {}
  Phase phase() const { return phase_; }
  TokenId token() const { return token_; }

 private:
  Phase phase_;
  TokenId token_;
};

struct GrammarOptions {
  // Event conditions exist in the vocabulary but are masked during sampling
  // unless enabled.
  bool allow_events = false;
};

class Grammar {
 public:
  Grammar() = default;
  explicit Grammar(GrammarOptions options) : options_(options) {}

  const GrammarOptions& options() const { return options_; }

  // State right after `begin`.
  GrammarState initial_state() const { return {}; }

  // Throws std::logic_error when state.phase == done.
  MaskVector next_mask(const GrammarState& state) const;

  // Throws GrammarError naming the phase when the token is not allowed.
  GrammarState advance(const GrammarState& state, TokenId token) const;

 private:
  GrammarOptions options_;
};

}  // namespace metagen
