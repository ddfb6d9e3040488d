#include <doctest.h>

#include <map>
#include <set>
#include <vector>

#include "metagen/design_space.hpp"

using namespace metagen;

namespace {

std::set<TokenId> allowed(const MaskVector& m) {
  auto v = m.allowed_tokens();
  return {v.begin(), v.end()};
}

std::set<TokenId> range(TokenId first, std::size_t n) {
  std::set<TokenId> s;
  for (std::size_t i = 0; i < n; ++i) s.insert(static_cast<TokenId>(first + i));
  return s;
}

struct StateLess {
  bool operator()(const GrammarState& a, const GrammarState& b) const {
    auto key = [](const GrammarState& s) {
      return std::tuple(static_cast<int>(s.phase), s.param_index, s.components_emitted, s.snippets_emitted,
                        s.last_pointer ? static_cast<int>(*s.last_pointer) : -1,
                        s.current ? static_cast<int>(*s.current) : -1);
    };
    return key(a) < key(b);
  }
};

}  // namespace

TEST_SUITE("design_space") {
  TEST_CASE("vocabulary layout") {
    const Vocabulary& v = build_vocabulary();
    CHECK(v.size() == 54);
    std::map<TokenKind, int> counts;
    for (const auto& t : v.tokens()) ++counts[t.kind];
    CHECK(counts[TokenKind::component] == 16);
    CHECK(counts[TokenKind::n_value] == 10);
    CHECK(counts[TokenKind::p_value] == 10);
    CHECK(counts[TokenKind::pointer] == 3);
    CHECK(counts[TokenKind::fork_offset] == 5);
    CHECK(counts[TokenKind::condition] == 8);
    CHECK(counts[TokenKind::begin] == 1);
    CHECK(counts[TokenKind::end] == 1);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.info(static_cast<TokenId>(i)).id == i);

    const std::vector<std::string> counts_names{"count(1%FE)", "count(5%FE)", "count(10%FE)", "count(15%FE)",
                                                "count(20%FE)"};
    for (std::size_t i = 0; i < 5; ++i) {
      auto id = v.find(counts_names[i]);
      REQUIRE(id);
      CHECK(v.info(*id).value == doctest::Approx(kCountGrid[i]));
    }
    // names are unique
    std::set<std::string> names;
    for (const auto& t : v.tokens()) names.insert(t.name);
    CHECK(names.size() == 54);
  }

  TEST_CASE("component descriptors") {
    CHECK(all_components().size() == 16);
    const auto& rn = describe(Component::reset_n);
    CHECK(rn.name == "reset_n");
    CHECK(rn.category == Category::search);
    REQUIRE(rn.param_kinds.size() == 1);
    CHECK(rn.param_kinds[0] == ParamKind::n_grid);
    CHECK(describe(Component::cross_uniform).param_kinds[0] == ParamKind::p_grid);
    CHECK(describe(Component::tabu).param_kinds.size() == 1);
    CHECK(describe(Component::always_select).category == Category::select);
    CHECK(describe(Component::roulette_wheel).param_kinds.empty());
    for (const auto& c : all_components()) CHECK(component_from_name(c.name) == c.id);
    CHECK_FALSE(component_from_name("bogus"));
  }

  TEST_CASE("grids") {
    CHECK(grid_values(ParamKind::n_grid).size() == 10);
    CHECK(grid_values(ParamKind::p_grid).size() == 10);
    CHECK(grid_values(ParamKind::n_grid).front() == 0.01);
    CHECK(grid_values(ParamKind::n_grid).back() == 0.45);
    CHECK(grid_values(ParamKind::p_grid).back() == 1.0);
    CHECK(grid_index(ParamKind::p_grid, 0.7) == 6u);
    CHECK_FALSE(grid_index(ParamKind::p_grid, 0.75));
  }

  TEST_CASE("masks of specific states") {
    const Grammar g;
    GrammarState s = g.initial_state();
    CHECK(allowed(g.next_mask(s)) == range(tok::kComponentBase, 16));

    GrammarState cu = g.advance(s, Vocabulary::component(Component::cross_uniform));
    CHECK(cu.phase == Phase::expect_param);
    CHECK(allowed(g.next_mask(cu)) == range(tok::kPGridBase, 10));

    GrammarState rw = g.advance(s, Vocabulary::component(Component::roulette_wheel));
    CHECK(rw.phase == Phase::expect_pointer);
    CHECK(allowed(g.next_mask(rw)) == range(tok::kPointerBase, 3));

    GrammarState fw = g.advance(rw, Vocabulary::pointer(PointerKind::forward));
    CHECK(fw.phase == Phase::expect_condition);
    CHECK(fw.last_pointer == PointerKind::forward);
    CHECK(allowed(g.next_mask(fw)) == std::set<TokenId>{tok::kOnce});

    GrammarState fk = g.advance(rw, Vocabulary::pointer(PointerKind::fork));
    CHECK(allowed(g.next_mask(fk)) == range(tok::kForkOffsetBase, 5));
    GrammarState fk2 = g.advance(fk, Vocabulary::fork_offset(2));
    auto cond = range(tok::kCountBase, 5);
    cond.insert(tok::kOnce);
    CHECK(allowed(g.next_mask(fk2)) == cond);
    const Grammar ge(GrammarOptions{.allow_events = true});
    cond.insert(tok::kEventBase);
    cond.insert(tok::kEventBase + 1);
    CHECK(allowed(ge.next_mask(fk2)) == cond);

    GrammarState done1 = g.advance(fw, tok::kOnce);
    CHECK(done1.phase == Phase::expect_component);
    CHECK(done1.snippets_emitted == 1);
    auto comp_end = range(tok::kComponentBase, 16);
    comp_end.insert(tok::kEnd);
    CHECK(allowed(g.next_mask(done1)) == comp_end);
    GrammarState fin = g.advance(done1, tok::kEnd);
    CHECK(fin.phase == Phase::done);
    CHECK_THROWS_AS(g.next_mask(fin), std::logic_error);
  }

  TEST_CASE("six components force end") {
    const Grammar g;
    GrammarState s = g.initial_state();
    for (int i = 0; i < 6; ++i) {
      s = g.advance(s, Vocabulary::component(Component::traverse));
      s = g.advance(s, Vocabulary::pointer(PointerKind::forward));
      s = g.advance(s, tok::kOnce);
    }
    CHECK(allowed(g.next_mask(s)) == std::set<TokenId>{tok::kEnd});
  }

  TEST_CASE("disallowed tokens name the phase") {
    const Grammar g;
    try {
      g.advance(g.initial_state(), tok::kEnd);
      FAIL("expected GrammarError");
    } catch (const GrammarError& e) {
      CHECK(e.phase() == Phase::expect_component);
      CHECK(std::string(e.what()).find("expect-component") != std::string::npos);
    }
    CHECK_THROWS_AS(g.advance(g.initial_state(), 999), GrammarError);
  }

  TEST_CASE("exhaustive state enumeration: no dead ends, bounded length") {
    for (bool events : {false, true}) {
      const Grammar g(GrammarOptions{.allow_events = events});
      std::set<GrammarState, StateLess> seen;
      std::vector<std::pair<GrammarState, int>> stack{{g.initial_state(), 0}};
      int max_depth = 0;
      while (!stack.empty()) {
        auto [s, depth] = stack.back();
        stack.pop_back();
        if (!seen.insert(s).second) continue;
        max_depth = std::max(max_depth, depth);
        if (s.phase == Phase::done) continue;
        const MaskVector m = g.next_mask(s);
        REQUIRE(m.count() >= 1);
        CHECK(s.components_emitted <= 6);
        if (m[tok::kEnd]) CHECK((s.phase == Phase::expect_component && s.snippets_emitted >= 1));
        for (TokenId t : m.allowed_tokens()) stack.emplace_back(g.advance(s, t), depth + 1);
      }
      // 6 snippets of at most 5 tokens plus `end`
      CHECK(max_depth <= 31);
      CHECK(seen.size() > 50);
    }
  }

  TEST_CASE("tokens per snippet = 3 + C + fork") {
    const Grammar g;
    for (const auto& c : all_components())
      for (PointerKind p : {PointerKind::forward, PointerKind::iterate, PointerKind::fork}) {
        GrammarState s = g.initial_state();
        int n = 0;
        s = g.advance(s, Vocabulary::component(c.id));
        ++n;
        for (std::size_t i = 0; i < c.param_kinds.size(); ++i, ++n) s = g.advance(s, g.next_mask(s).allowed_tokens()[0]);
        s = g.advance(s, Vocabulary::pointer(p));
        ++n;
        if (p == PointerKind::fork) {
          s = g.advance(s, Vocabulary::fork_offset(1));
          ++n;
        }
        s = g.advance(s, tok::kOnce);
        ++n;
        CHECK(n == static_cast<int>(3 + c.param_kinds.size() + (p == PointerKind::fork ? 1 : 0)));
        CHECK(s.phase == Phase::expect_component);
      }
  }
}
