#include "metagen/design_space.hpp"

#include <charconv>
#include <cmath>

namespace metagen {
namespace {

constexpr std::array<ParamKind, 1> kOneN{ParamKind::n_grid};
constexpr std::array<ParamKind, 1> kOneP{ParamKind::p_grid};
constexpr std::span<const ParamKind> kNone{};

const std::array<ComponentDescriptor, kNumComponents> kComponents{{
    {Component::traverse, "traverse", Category::choose, kNone},
    {Component::roulette_wheel, "roulette_wheel", Category::choose, kNone},
    {Component::tournament, "tournament", Category::choose, kNone},
    {Component::nich, "nich", Category::choose, kNone},
    {Component::reset_n, "reset_n", Category::search, kOneN},
    {Component::reset_rand, "reset_rand", Category::search, kOneP},
    {Component::reset_creep, "reset_creep", Category::search, kOneP},
    {Component::cross_n, "cross_n", Category::search, kOneN},
    {Component::cross_uniform, "cross_uniform", Category::search, kOneP},
    {Component::reinitialize, "reinitialize", Category::search, kNone},
    {Component::greedy_select, "greedy_select", Category::select, kNone},
    {Component::pairwise_select, "pairwise_select", Category::select, kNone},
    {Component::round_robin_select, "round_robin_select", Category::select, kNone},
    {Component::simulated_annealing_select, "simulated_annealing_select", Category::select, kNone},
    {Component::tabu, "tabu", Category::select, kOneN},
    {Component::always_select, "always_select", Category::select, kNone},
}};

std::string format_value(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool near(double a, double b) { return std::abs(a - b) < 1e-12; }

}  // namespace

const ComponentDescriptor& describe(Component c) { return kComponents[static_cast<std::size_t>(c)]; }

std::span<const ComponentDescriptor> all_components() { return kComponents; }

std::optional<Component> component_from_name(std::string_view name) {
  for (const auto& c : kComponents)
    if (c.name == name) return c.id;
  return std::nullopt;
}

std::string_view pointer_name(PointerKind p) {
  switch (p) {
    case PointerKind::forward:
      return "forward";
    case PointerKind::iterate:
      return "iterate";
    case PointerKind::fork:
      return "fork";
  }
  return "?";
}

std::string_view event_name(EventKind e) {
  return e == EventKind::local_optimal ? "local_optimal" : "stagnation_3";
}

std::optional<EventKind> event_from_name(std::string_view name) {
  if (name == "local_optimal") return EventKind::local_optimal;
  if (name == "stagnation_3") return EventKind::stagnation_3;
  return std::nullopt;
}

std::span<const double> grid_values(ParamKind kind) {
  return kind == ParamKind::n_grid ? std::span<const double>(kNGrid) : std::span<const double>(kPGrid);
}

std::optional<std::size_t> grid_index(ParamKind kind, double value) {
  auto g = grid_values(kind);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (near(g[i], value)) return i;
  return std::nullopt;
}

std::optional<std::size_t> count_index(double fraction) {
  for (std::size_t i = 0; i < kCountGrid.size(); ++i)
    if (near(kCountGrid[i], fraction)) return i;
  return std::nullopt;
}

TokenId Vocabulary::grid(ParamKind kind, std::size_t index) {
  if (index >= 10) throw std::out_of_range("grid index");
  return (kind == ParamKind::n_grid ? tok::kNGridBase : tok::kPGridBase) + static_cast<TokenId>(index);
}

TokenId Vocabulary::fork_offset(std::size_t k) {
  if (k < 1 || k > kMaxForkOffset) throw std::out_of_range("fork offset");
  return tok::kForkOffsetBase + static_cast<TokenId>(k - 1);
}

Vocabulary::Vocabulary() {
  auto add = [this](TokenKind kind, std::string name, double value) {
    tokens_.push_back({static_cast<TokenId>(tokens_.size()), kind, std::move(name), value});
  };
  for (std::size_t i = 0; i < kNumComponents; ++i)
    add(TokenKind::component, std::string(kComponents[i].name), static_cast<double>(i));
  for (double v : kNGrid) add(TokenKind::n_value, "n=" + format_value(v), v);
  for (double v : kPGrid) add(TokenKind::p_value, "p=" + format_value(v), v);
  for (PointerKind p : {PointerKind::forward, PointerKind::iterate, PointerKind::fork})
    add(TokenKind::pointer, std::string(pointer_name(p)), static_cast<double>(p));
  for (std::size_t k = 1; k <= kMaxForkOffset; ++k)
    add(TokenKind::fork_offset, "offset=" + std::to_string(k), static_cast<double>(k));
  for (std::size_t i = 0; i < kCountGrid.size(); ++i)
    add(TokenKind::condition, "count(" + std::to_string(kCountPercent[i]) + "%FE)", kCountGrid[i]);
  add(TokenKind::condition, "once", 0.0);
  add(TokenKind::condition, "event(local_optimal)", static_cast<double>(EventKind::local_optimal));
  add(TokenKind::condition, "event(stagnation_3)", static_cast<double>(EventKind::stagnation_3));
  add(TokenKind::begin, "begin", 0.0);
  add(TokenKind::end, "end", 0.0);
}

std::optional<TokenId> Vocabulary::find(std::string_view name) const {
  for (const auto& t : tokens_)
    if (t.name == name) return t.id;
  return std::nullopt;
}

const Vocabulary& build_vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

std::size_t MaskVector::count() const {
  std::size_t n = 0;
  for (bool b : allowed) n += b;
  return n;
}

std::vector<TokenId> MaskVector::allowed_tokens() const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < allowed.size(); ++i)
    if (allowed[i]) out.push_back(static_cast<TokenId>(i));
  return out;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::expect_component:
      return "expect-component";
    case Phase::expect_param:
      return "expect-param";
    case Phase::expect_pointer:
      return "expect-pointer";
    case Phase::expect_fork_offset:
      return "expect-fork-offset";
    case Phase::expect_condition:
      return "expect-condition";
    case Phase::done:
      return "done";
  }
  return "?";
}

MaskVector Grammar::next_mask(const GrammarState& s) const {
  MaskVector m;
  auto allow_range = [&m](TokenId first, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) m.allowed[first + i] = true;
  };
  switch (s.phase) {
    case Phase::expect_component:
      if (s.components_emitted < kMaxComponents) allow_range(tok::kComponentBase, kNumComponents);
      if (s.snippets_emitted >= 1) m.allowed[tok::kEnd] = true;
      break;
    case Phase::expect_param: {
      const auto kinds = describe(*s.current).param_kinds;
      allow_range(kinds[s.param_index] == ParamKind::n_grid ? tok::kNGridBase : tok::kPGridBase, 10);
      break;
    }
    case Phase::expect_pointer:
      allow_range(tok::kPointerBase, 3);
      break;
    case Phase::expect_fork_offset:
      allow_range(tok::kForkOffsetBase, kMaxForkOffset);
      break;
    case Phase::expect_condition:
      m.allowed[tok::kOnce] = true;
      if (s.last_pointer != PointerKind::forward) {
        allow_range(tok::kCountBase, kCountGrid.size());
        if (options_.allow_events) allow_range(tok::kEventBase, 2);
      }
      break;
    case Phase::done:
      throw std::logic_error("next_mask: grammar state is already done");
  }
  return m;
}

GrammarState Grammar::advance(const GrammarState& s, TokenId token) const {
  if (s.phase == Phase::done) throw GrammarError(s.phase, token, "token after end");
  if (token >= kVocabSize || !next_mask(s)[token]) {
    std::string name = token < kVocabSize ? build_vocabulary().info(token).name : std::to_string(token);
    throw GrammarError(s.phase, token,
                       "token '" + name + "' not allowed in phase " + std::string(phase_name(s.phase)));
  }
  GrammarState n = s;
  switch (s.phase) {
    case Phase::expect_component:
      if (token == tok::kEnd) {
        n.phase = Phase::done;
        break;
      }
      n.current = static_cast<Component>(token - tok::kComponentBase);
      n.components_emitted += 1;
      n.param_index = 0;
      n.last_pointer.reset();
      n.phase = describe(*n.current).param_kinds.empty() ? Phase::expect_pointer : Phase::expect_param;
      break;
    case Phase::expect_param:
      n.param_index += 1;
      if (n.param_index >= describe(*n.current).param_kinds.size()) n.phase = Phase::expect_pointer;
      break;
    case Phase::expect_pointer:
      n.last_pointer = static_cast<PointerKind>(token - tok::kPointerBase);
      n.phase = *n.last_pointer == PointerKind::fork ? Phase::expect_fork_offset : Phase::expect_condition;
      break;
    case Phase::expect_fork_offset:
      n.phase = Phase::expect_condition;
      break;
    case Phase::expect_condition:
      n.snippets_emitted += 1;
      n.phase = Phase::expect_component;
      break;
    case Phase::done:
      break;
  }
  return n;
}

}  // namespace metagen
