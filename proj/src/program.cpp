#include "metagen/program.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace metagen {
namespace {

std::string format_value(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void check_structure(const std::vector<Snippet>& snippets) {
  if (snippets.empty()) throw std::invalid_argument("program has no snippets");
  if (snippets.size() > kMaxComponents)
    throw std::invalid_argument("program has more than " + std::to_string(kMaxComponents) + " snippets");
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    const Snippet& s = snippets[i];
    const auto& desc = describe(s.component);
    const std::string where = "snippet " + std::to_string(i + 1) + " (" + std::string(desc.name) + "): ";
    if (s.params.size() != desc.param_kinds.size())
      throw std::invalid_argument(where + "expected " + std::to_string(desc.param_kinds.size()) +
                                  " parameter(s), got " + std::to_string(s.params.size()));
    for (double p : s.params)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(where + "parameter outside [0, 1]");
    if (s.pointer.kind == PointerKind::fork) {
      if (s.pointer.offset < 1 || s.pointer.offset > kMaxForkOffset)
        throw std::invalid_argument(where + "fork offset outside [1, 5]");
    } else if (s.pointer.offset != 0) {
      throw std::invalid_argument(where + "offset given for non-fork pointer");
    }
    if (s.pointer.kind == PointerKind::forward && s.condition.kind != ConditionKind::once)
      throw std::invalid_argument(where + "forward pointer requires condition once");
    if (s.condition.kind == ConditionKind::count_frac && !count_index(s.condition.fraction))
      throw std::invalid_argument(where + "count condition not in {1,5,10,15,20}%");
  }
}

TokenId condition_token(const Condition& c) {
  switch (c.kind) {
    case ConditionKind::once:
      return tok::kOnce;
    case ConditionKind::count_frac:
      return Vocabulary::count(*count_index(c.fraction));
    case ConditionKind::event:
      return Vocabulary::event(c.event);
  }
  return tok::kOnce;
}

// Builds the block opened at snippet `first` (or the root when guard is
// empty), scanning for nested openers inside [scan_from, last].
Block build_block(const std::vector<Snippet>& s, std::size_t first, std::size_t last,
                  std::size_t scan_from, std::optional<Condition> guard) {
  Block b{first, last, guard, {}};
  std::size_t j = scan_from;
  while (j <= last && j < s.size()) {
    const Pointer& p = s[j].pointer;
    if (p.kind == PointerKind::forward) {
      ++j;
      continue;
    }
    const std::size_t end = p.kind == PointerKind::iterate ? j : std::min(j + p.offset, last);
    b.children.push_back(build_block(s, j, end, j + 1, s[j].condition));
    j = end + 1;
  }
  return b;
}

const Block* find_block(const Block& b, std::size_t index) {
  for (const Block& c : b.children) {
    if (c.first == index) return &c;
    if (index > c.first && index <= c.last) return find_block(c, index);
  }
  return nullptr;
}

class TextParser {
 public:
  explicit TextParser(std::string_view text) : text_(text) {}

  Program parse() {
    std::vector<Snippet> snippets;
    skip_ws();
    if (at_end()) fail("empty program");
    while (true) {
      snippets.push_back(snippet());
      skip_ws();
      if (at_end()) break;
      expect(';');
      skip_ws();
      if (at_end()) fail("expected snippet after ';'");
    }
    try {
      return make_program(std::move(snippets));
    } catch (const std::invalid_argument& e) {
      fail(e.what(), 0);
    }
    return {};
  }

 private:
  Snippet snippet() {
    Snippet s;
    const std::size_t name_pos = pos_;
    std::string name = identifier();
    auto comp = component_from_name(name);
    if (!comp) fail("unknown component '" + name + "'", name_pos);
    s.component = *comp;
    skip_ws();
    if (peek() == '(') {
      ++pos_;
      do {
        skip_ws();
        s.params.push_back(number());
        skip_ws();
      } while (consume(','));
      expect(')');
    }
    if (s.params.size() != describe(s.component).param_kinds.size())
      fail("component '" + name + "' takes " + std::to_string(describe(s.component).param_kinds.size()) +
               " parameter(s)", name_pos);
    skip_ws();
    expect('|');
    skip_ws();
    s.pointer = pointer();
    skip_ws();
    expect('|');
    skip_ws();
    s.condition = condition();
    if (s.pointer.kind == PointerKind::forward && s.condition.kind != ConditionKind::once)
      fail("forward pointer requires condition once", name_pos);
    return s;
  }

  Pointer pointer() {
    const std::size_t at = pos_;
    std::string word = identifier();
    if (word == "forward") return Pointer::forward();
    if (word == "iterate") return Pointer::iterate();
    if (word == "fork") {
      expect('(');
      skip_ws();
      const double k = number();
      skip_ws();
      expect(')');
      if (k != std::floor(k) || k < 1 || k > static_cast<double>(kMaxForkOffset))
        fail("fork offset must be an integer in [1, 5]", at);
      return Pointer::fork(static_cast<std::size_t>(k));
    }
    fail("unknown pointer '" + word + "'", at);
    return {};
  }

  Condition condition() {
    const std::size_t at = pos_;
    std::string word = identifier();
    if (word == "once") return Condition::once();
    if (word == "count") {
      expect('(');
      skip_ws();
      const double pct = number();
      skip_ws();
      expect('%');
      if (identifier() != "FE") fail("expected 'FE' in count condition");
      expect(')');
      for (std::size_t i = 0; i < kCountPercent.size(); ++i)
        if (pct == kCountPercent[i]) return Condition::count(kCountGrid[i]);
      fail("count percentage must be one of 1, 5, 10, 15, 20", at);
    }
    if (word == "event") {
      expect('(');
      skip_ws();
      const std::size_t name_at = pos_;
      std::string ev = identifier();
      skip_ws();
      expect(')');
      auto e = event_from_name(ev);
      if (!e) fail("unknown event '" + ev + "'", name_at);
      return Condition::on(*e);
    }
    fail("unknown condition '" + word + "'", at);
    return {};
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' ||
                         peek() == 'e' || peek() == 'E' || peek() == '-' || peek() == '+'))
      ++pos_;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_ || start == pos_) fail("expected number", start);
    return v;
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  [[noreturn]] void fail(const std::string& what) { fail(what, pos_); }
  [[noreturn]] void fail(const std::string& what, std::size_t at) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SyntaxError(line, col, what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

bool representable_as_tokens(const Program& program) {
  for (const Snippet& s : program.snippets) {
    const auto kinds = describe(s.component).param_kinds;
    for (std::size_t i = 0; i < s.params.size(); ++i)
      if (!grid_index(kinds[i], s.params[i])) return false;
  }
  return true;
}

std::vector<TokenId> to_tokens(const Program& program) {
  std::vector<TokenId> out;
  for (const Snippet& s : program.snippets) {
    out.push_back(Vocabulary::component(s.component));
    const auto kinds = describe(s.component).param_kinds;
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      auto idx = grid_index(kinds[i], s.params[i]);
      if (!idx)
        throw std::invalid_argument("parameter " + format_value(s.params[i]) + " of " +
                                    std::string(describe(s.component).name) + " is off the token grid");
      out.push_back(Vocabulary::grid(kinds[i], *idx));
    }
    out.push_back(Vocabulary::pointer(s.pointer.kind));
    if (s.pointer.kind == PointerKind::fork) out.push_back(Vocabulary::fork_offset(s.pointer.offset));
    out.push_back(condition_token(s.condition));
  }
  out.push_back(tok::kEnd);
  return out;
}

Program make_program(std::vector<Snippet> snippets) {
  check_structure(snippets);
  Program p{std::move(snippets), {}};
  if (representable_as_tokens(p)) p.source_tokens = to_tokens(p);
  return p;
}

Program parse_tokens(std::span<const TokenId> tokens) {
  const Grammar grammar(GrammarOptions{.allow_events = true});
  const Vocabulary& vocab = build_vocabulary();
  GrammarState state = grammar.initial_state();
  std::vector<Snippet> snippets;
  Snippet cur;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i];
    if (state.phase == Phase::done) throw ParseError(i, "token after end");
    if (t >= kVocabSize) throw ParseError(i, "token id out of range");
    const Phase before = state.phase;
    try {
      state = grammar.advance(state, t);
    } catch (const GrammarError& e) {
      throw ParseError(i, e.what());
    }
    const TokenInfo& info = vocab.info(t);
    switch (before) {
      case Phase::expect_component:
        if (t != tok::kEnd) cur = Snippet{static_cast<Component>(t - tok::kComponentBase), {}, {}, {}};
        break;
      case Phase::expect_param:
        cur.params.push_back(info.value);
        break;
      case Phase::expect_pointer:
        cur.pointer = {static_cast<PointerKind>(t - tok::kPointerBase), 0};
        break;
      case Phase::expect_fork_offset:
        cur.pointer.offset = static_cast<std::size_t>(info.value);
        break;
      case Phase::expect_condition:
        if (t == tok::kOnce) cur.condition = Condition::once();
        else if (t >= tok::kEventBase) cur.condition = Condition::on(static_cast<EventKind>(t - tok::kEventBase));
        else cur.condition = Condition::count(info.value);
        snippets.push_back(std::move(cur));
        cur = {};
        break;
      case Phase::done:
        break;
    }
  }
  if (state.phase != Phase::done) throw ParseError(tokens.size(), "missing end token");
  Program p{std::move(snippets), std::vector<TokenId>(tokens.begin(), tokens.end())};
  return p;
}

std::string to_text(const Program& program) {
  std::string out;
  for (std::size_t i = 0; i < program.snippets.size(); ++i) {
    const Snippet& s = program.snippets[i];
    if (i) out += "; ";
    out += describe(s.component).name;
    if (!s.params.empty()) {
      out += '(';
      for (std::size_t k = 0; k < s.params.size(); ++k) {
        if (k) out += ',';
        out += format_value(s.params[k]);
      }
      out += ')';
    }
    out += " | ";
    if (s.pointer.kind == PointerKind::fork) out += "fork(" + std::to_string(s.pointer.offset) + ")";
    else out += pointer_name(s.pointer.kind);
    out += " | ";
    switch (s.condition.kind) {
      case ConditionKind::once:
        out += "once";
        break;
      case ConditionKind::count_frac:
        out += "count(" + std::to_string(kCountPercent[*count_index(s.condition.fraction)]) + "%FE)";
        break;
      case ConditionKind::event:
        out += "event(" + std::string(event_name(s.condition.event)) + ")";
        break;
    }
  }
  return out;
}

Program from_text(std::string_view text) { return TextParser(text).parse(); }

Block control_flow(const Program& program) {
  const auto& s = program.snippets;
  if (s.empty()) return {};
  return build_block(s, 0, s.size() - 1, 0, std::nullopt);
}

std::optional<std::size_t> block_end(const Block& root, std::size_t index) {
  const Block* b = find_block(root, index);
  if (!b) return std::nullopt;
  return b->last;
}

std::vector<std::string> validate(const Program& program) {
  std::vector<std::string> warnings;
  bool has_search = false, has_select = false;
  for (const Snippet& s : program.snippets) {
    has_search |= describe(s.component).category == Category::search;
    has_select |= describe(s.component).category == Category::select;
  }
  if (!has_search) warnings.emplace_back("no search component");
  if (!has_select) warnings.emplace_back("no select component");
  const Block root = control_flow(program);
  for (std::size_t i = 0; i < program.snippets.size(); ++i) {
    const Pointer& p = program.snippets[i].pointer;
    if (p.kind != PointerKind::fork) continue;
    auto end = block_end(root, i);
    if (end && *end < i + p.offset)
      warnings.push_back("fork offset clamped at snippet " + std::to_string(i + 1) + " (fork(" +
                         std::to_string(p.offset) + ") covers " + std::to_string(*end - i) + ")");
  }
  return warnings;
}

}  // namespace metagen
