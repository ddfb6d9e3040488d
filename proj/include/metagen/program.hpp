#pragma once

// Validated program representation: snippets with decoded hyperparameters,
// pointers and conditions, plus the resolved loop structure.
//
// Text form (one program per string, whitespace-insensitive):
//   program := snippet (";" snippet)*
//   snippet := NAME ["(" value ("," value)* ")"] "|" ptr "|" cond
//   ptr     := "forward" | "iterate" | "fork(" INT ")"
//   cond    := "once" | "count(" PCT "%FE)" | "event(" NAME ")"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "metagen/design_space.hpp"

namespace metagen {

struct Pointer {
  PointerKind kind = PointerKind::forward;
  std::size_t offset = 0;  // 1..5 for fork, 0 otherwise

  static Pointer forward() { return {PointerKind::forward, 0}; }
  static Pointer iterate() { return {PointerKind::iterate, 0}; }
  static Pointer fork(std::size_t k) { return {PointerKind::fork, k}; }
  bool operator==(const Pointer&) const = default;
};

struct Condition {
  ConditionKind kind = ConditionKind::once;
  double fraction = 0.0;  // count_frac only
  EventKind event = EventKind::local_optimal;  // event only

  static Condition once() { return {}; }
  static Condition count(double fraction) { return {ConditionKind::count_frac, fraction, {}}; }
  static Condition on(EventKind e) { return {ConditionKind::event, 0.0, e}; }
  bool operator==(const Condition&) const = default;
};

struct Snippet {
  Component component = Component::traverse;
  std::vector<double> params;
  Pointer pointer;
  Condition condition;
  bool operator==(const Snippet&) const = default;
};

struct Program {
  std::vector<Snippet> snippets;
  // Originating token sequence (without `begin`, ending with `end`). Empty
  // when a parameter lies off the token grids (hand-built baselines).
  std::vector<TokenId> source_tokens;
};

// Token-level parse failure; position indexes the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : std::runtime_error("token " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Text-level parse failure with 1-based line and column.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::size_t line, std::size_t column, const std::string& what)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

Program parse_tokens(std::span<const TokenId> tokens);

// Throws std::invalid_argument when a parameter is off its grid.
std::vector<TokenId> to_tokens(const Program& program);
bool representable_as_tokens(const Program& program);

// Checks structural invariants and fills source_tokens when possible.
// Throws std::invalid_argument on violation.
Program make_program(std::vector<Snippet> snippets);

std::string to_text(const Program& program);
Program from_text(std::string_view text);

// Semantic warnings; never rejects.
std::vector<std::string> validate(const Program& program);

// Loop structure. A block owns snippets [first, last]; snippet `first`
// carries the pointer that created it and its condition guards the loop.
// The top-level block spans the whole program, has no guard and repeats
// until the evaluation budget is spent.
struct Block {
  std::size_t first = 0;
  std::size_t last = 0;
  std::optional<Condition> guard;
  std::vector<Block> children;  // disjoint, ordered by first
};

Block control_flow(const Program& program);

// Resolved end of the block opened at `index`, after clamping.
std::optional<std::size_t> block_end(const Block& root, std::size_t index);

}  // namespace metagen
