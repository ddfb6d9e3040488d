#include "metagen/problems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "metagen/rng.hpp"
#include "metagen/simd/kernels.hpp"

namespace metagen {
namespace {

std::optional<std::size_t> perfect_square_root(std::size_t v) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(v))));
  if (r * r == v) return r;
  return std::nullopt;
}

bool integer_valued(Family f) {
  return f == Family::onemax || f == Family::leadingones || f == Family::harmonic ||
         f == Family::ising_ring || f == Family::ising_torus;
}

std::optional<double> base_optimum(Family f, std::size_t length) {
  const auto L = static_cast<double>(length);
  switch (f) {
    case Family::onemax:
    case Family::leadingones:
    case Family::ising_ring:
      return L;
    case Family::harmonic:
      return L * (L + 1.0) / 2.0;
    case Family::ising_torus:
      return 2.0 * L;
    case Family::nqueens: {
      const std::size_t n = *perfect_square_root(length);
      if (n == 2) return 1.0;
      if (n == 3) return 2.0;
      return static_cast<double>(n);
    }
    case Family::labs:
    case Family::mivs:
      return std::nullopt;
  }
  return std::nullopt;
}

Graph random_graph(std::size_t n, std::uint64_t seed) {
  Graph g(n);
  Rng rng(derive_seed(seed, {label_hash("mivs-graph")}));
  const double p = n == 0 ? 0.0 : std::min(1.0, 4.0 / static_cast<double>(n));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < p) {
        g[u].push_back(v);
        g[v].push_back(u);
      }
  return g;
}

double onemax(std::span<const std::uint8_t> w) { return static_cast<double>(simd::count_ones(w)); }

double leadingones(std::span<const std::uint8_t> w) {
  std::size_t i = 0;
  while (i < w.size() && w[i]) ++i;
  return static_cast<double>(i);
}

double harmonic(std::span<const std::uint8_t> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i]) s += static_cast<double>(i + 1);
  return s;
}

double labs_merit(std::span<const std::uint8_t> w) {
  const std::size_t n = w.size();
  long long energy = 0;
  for (std::size_t k = 1; k < n; ++k) {
    long long c = 0;
    for (std::size_t i = 0; i + k < n; ++i) c += (w[i] == w[i + k]) ? 1 : -1;
    energy += c * c;
  }
  return static_cast<double>(n * n) / (2.0 * static_cast<double>(energy));
}

double ising_ring(std::span<const std::uint8_t> w) {
  const std::size_t n = w.size();
  if (n == 1) return 1.0;
  const std::size_t differ = simd::hamming(w.first(n - 1), w.subspan(1));
  return static_cast<double>(n - 1 - differ) + (w[n - 1] == w[0] ? 1.0 : 0.0);
}

double ising_torus(std::span<const std::uint8_t> w, std::size_t n) {
  double agree = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = w.subspan(r * n, n);
    for (std::size_t c = 0; c < n; ++c) agree += row[c] == row[(c + 1) % n];
    auto below = w.subspan(((r + 1) % n) * n, n);
    agree += static_cast<double>(n - simd::hamming(row, below));
  }
  return agree;
}

double mivs(std::span<const std::uint8_t> w, const Graph& g) {
  double selected = 0.0;
  long long conflicts = 0;
  for (std::size_t u = 0; u < w.size(); ++u) {
    if (!w[u]) continue;
    selected += 1.0;
    for (std::size_t v : g[u])
      if (v > u && w[v]) ++conflicts;
  }
  return selected - 2.0 * static_cast<double>(conflicts);
}

double nqueens(std::span<const std::uint8_t> w, std::size_t n) {
  std::vector<long long> rows(n, 0), cols(n, 0), diag(2 * n, 0), anti(2 * n, 0);
  long long queens = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (w[r * n + c]) {
        ++queens;
        ++rows[r];
        ++cols[c];
        ++diag[r + n - 1 - c];
        ++anti[r + c];
      }
  long long pairs = 0;
  auto add = [&pairs](const std::vector<long long>& v) {
    for (long long k : v) pairs += k * (k - 1) / 2;
  };
  add(rows);
  add(cols);
  add(diag);
  add(anti);
  return static_cast<double>(queens - static_cast<long long>(n) * pairs);
}

std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::onemax:
      return "onemax";
    case Family::leadingones:
      return "leadingones";
    case Family::harmonic:
      return "harmonic";
    case Family::labs:
      return "labs";
    case Family::ising_ring:
      return "ising_ring";
    case Family::ising_torus:
      return "ising_torus";
    case Family::mivs:
      return "mivs";
    case Family::nqueens:
      return "nqueens";
  }
  return "?";
}

std::optional<Family> family_from_name(std::string_view name) {
  for (Family f : {Family::onemax, Family::leadingones, Family::harmonic, Family::labs, Family::ising_ring,
                   Family::ising_torus, Family::mivs, Family::nqueens})
    if (family_name(f) == name) return f;
  return std::nullopt;
}

std::string layer_name(const WModelLayer& layer) {
  std::string base;
  switch (layer.kind) {
    case WModelLayer::Kind::dummy:
      base = "dummy";
      break;
    case WModelLayer::Kind::neutrality:
      base = "neutrality";
      break;
    case WModelLayer::Kind::epistasis:
      base = "epistasis";
      break;
    case WModelLayer::Kind::ruggedness:
      base = "ruggedness";
      break;
  }
  return base + std::to_string(layer.parameter);
}

std::vector<std::size_t> dummy_positions(std::size_t d, std::size_t m, std::uint64_t seed) {
  if (m > d) throw std::invalid_argument("dummy: m exceeds length");
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t k = 0; k < m; ++k) std::swap(idx[k], idx[k + rng.below(d - k)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

BitString apply_dummy(std::span<const std::uint8_t> x, std::size_t m, std::uint64_t seed) {
  BitString out;
  out.reserve(m);
  for (std::size_t p : dummy_positions(x.size(), m, seed)) out.push_back(x[p]);
  return out;
}

BitString apply_neutrality(std::span<const std::uint8_t> x, std::size_t mu) {
  if (mu == 0) throw std::invalid_argument("neutrality: mu must be positive");
  const std::size_t blocks = x.size() / mu;
  BitString out;
  out.reserve(blocks + x.size() % mu);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < mu; ++j) ones += x[b * mu + j];
    out.push_back(2 * ones > mu ? 1 : 0);  // ties -> 0
  }
  for (std::size_t i = blocks * mu; i < x.size(); ++i) out.push_back(x[i]);
  return out;
}

std::vector<std::uint16_t> epistasis_table(std::size_t nu, std::uint64_t seed) {
  if (nu == 0 || nu > 8) throw std::invalid_argument("epistasis: nu must be in [1, 8]");
  std::vector<std::uint16_t> table(std::size_t{1} << nu);
  std::iota(table.begin(), table.end(), std::uint16_t{0});
  Rng rng(seed);
  for (std::size_t i = table.size() - 1; i > 0; --i) std::swap(table[i], table[rng.below(i + 1)]);
  return table;
}

namespace {
BitString epistasis_with(std::span<const std::uint8_t> x, std::size_t nu,
                         const std::vector<std::uint16_t>& table) {
  BitString out(x.begin(), x.end());
  const std::size_t blocks = x.size() / nu;
  for (std::size_t b = 0; b < blocks; ++b) {
    unsigned v = 0;
    for (std::size_t j = 0; j < nu; ++j) v = (v << 1) | x[b * nu + j];
    const unsigned m = table[v];
    for (std::size_t j = 0; j < nu; ++j) out[b * nu + j] = (m >> (nu - 1 - j)) & 1u;
  }
  return out;
}
}  // namespace

BitString apply_epistasis(std::span<const std::uint8_t> x, std::size_t nu, std::uint64_t seed) {
  return epistasis_with(x, nu, epistasis_table(nu, seed));
}

long long apply_ruggedness(long long f, std::size_t gamma, long long f_max) {
  if (f < 1) return f;
  const long long pair = (f - 1) / 2;
  if (pair >= static_cast<long long>(gamma)) return f;
  const long long a = 2 * pair + 1, b = a + 1;
  if (b >= f_max) return f;
  return f == a ? b : a;
}

std::string ProblemInstance::key() const {
  ProblemKey k{family_, dim_, layers_};
  return k.str();
}

double ProblemInstance::evaluate_base(std::span<const std::uint8_t> w) const {
  switch (family_) {
    case Family::onemax:
      return onemax(w);
    case Family::leadingones:
      return leadingones(w);
    case Family::harmonic:
      return harmonic(w);
    case Family::labs:
      return labs_merit(w);
    case Family::ising_ring:
      return ising_ring(w);
    case Family::ising_torus:
      return ising_torus(w, board_);
    case Family::mivs:
      return mivs(w, graph_);
    case Family::nqueens:
      return nqueens(w, board_);
  }
  return 0.0;
}

double ProblemInstance::evaluate(std::span<const std::uint8_t> x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("evaluate: length " + std::to_string(x.size()) + " != d = " +
                                std::to_string(dim_));
  if (layers_.empty()) return evaluate_base(x);
  BitString w(x.begin(), x.end());
  std::optional<std::size_t> gamma;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const WModelLayer& l = layers_[i];
    switch (l.kind) {
      case WModelLayer::Kind::dummy: {
        BitString next;
        next.reserve(dummy_positions_[i].size());
        for (std::size_t p : dummy_positions_[i]) next.push_back(w[p]);
        w = std::move(next);
        break;
      }
      case WModelLayer::Kind::neutrality:
        w = apply_neutrality(w, l.parameter);
        break;
      case WModelLayer::Kind::epistasis:
        w = epistasis_with(w, l.parameter, epistasis_tables_[i]);
        break;
      case WModelLayer::Kind::ruggedness:
        gamma = l.parameter;
        break;
    }
  }
  const double f = evaluate_base(w);
  if (!gamma) return f;
  return static_cast<double>(apply_ruggedness(std::llround(f), *gamma, ruggedness_max_));
}

ProblemInstance make_instance(Family family, std::size_t d, std::vector<WModelLayer> layers,
                              std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("dimension must be positive");
  ProblemInstance inst;
  inst.family_ = family;
  inst.dim_ = d;
  inst.seed_ = seed;
  inst.layers_ = std::move(layers);
  inst.dummy_positions_.resize(inst.layers_.size());
  inst.epistasis_tables_.resize(inst.layers_.size());
  std::size_t length = d;
  bool rugged = false;
  for (std::size_t i = 0; i < inst.layers_.size(); ++i) {
    const WModelLayer& l = inst.layers_[i];
    if (rugged) throw std::invalid_argument("ruggedness must be the last layer");
    const std::uint64_t layer_seed = derive_seed(seed, {label_hash(layer_name(l)), i});
    switch (l.kind) {
      case WModelLayer::Kind::dummy:
        if (l.parameter == 0 || l.parameter > length)
          throw std::invalid_argument("dummy: m must be in [1, working length]");
        inst.dummy_positions_[i] = dummy_positions(length, l.parameter, layer_seed);
        length = l.parameter;
        break;
      case WModelLayer::Kind::neutrality:
        if (l.parameter == 0 || l.parameter > length)
          throw std::invalid_argument("neutrality: mu must be in [1, working length]");
        length = length / l.parameter + length % l.parameter;
        break;
      case WModelLayer::Kind::epistasis:
        if (l.parameter == 0 || l.parameter > 8 || l.parameter > length)
          throw std::invalid_argument("epistasis: nu must be in [1, min(8, working length)]");
        inst.epistasis_tables_[i] = epistasis_table(l.parameter, layer_seed);
        break;
      case WModelLayer::Kind::ruggedness:
        if (!integer_valued(family))
          throw std::invalid_argument("ruggedness requires a non-negative integer-valued family");
        rugged = true;
        break;
    }
  }
  inst.working_ = length;
  switch (family) {
    case Family::labs:
      if (length < 2) throw std::invalid_argument("labs needs length >= 2");
      break;
    case Family::ising_torus:
    case Family::nqueens: {
      auto n = perfect_square_root(length);
      if (!n)
        throw std::invalid_argument(std::string(family_name(family)) + " needs a perfect-square length, got " +
                                    std::to_string(length));
      inst.board_ = *n;
      break;
    }
    case Family::mivs:
      inst.graph_ = random_graph(length, seed);
      break;
    default:
      break;
  }
  inst.known_optimum_ = base_optimum(family, length);
  if (rugged) inst.ruggedness_max_ = std::llround(*inst.known_optimum_);
  return inst;
}

ProblemInstance make_mivs_instance(Graph graph) {
  ProblemInstance inst;
  inst.family_ = Family::mivs;
  inst.dim_ = graph.size();
  inst.working_ = graph.size();
  for (std::size_t u = 0; u < graph.size(); ++u)
    for (std::size_t v : graph[u])
      if (v >= graph.size() || v == u) throw std::invalid_argument("mivs: bad adjacency");
  inst.graph_ = std::move(graph);
  return inst;
}

std::string ProblemKey::str() const {
  std::string s(family_name(family));
  if (dim) s += ":" + std::to_string(*dim);
  for (const auto& l : layers) s += "+" + layer_name(l);
  return s;
}

ProblemKey parse_problem_key(std::string_view key) {
  ProblemKey out;
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = key.find('+', start);
    parts.push_back(key.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string_view part = parts[i];
    if (auto colon = part.find(':'); colon != std::string_view::npos) {
      if (out.dim) throw std::invalid_argument("problem key has two dimensions: " + std::string(key));
      out.dim = parse_size(part.substr(colon + 1), "dimension");
      part = part.substr(0, colon);
    }
    if (i == 0) {
      auto fam = family_from_name(part);
      if (!fam) throw std::invalid_argument("unknown problem family '" + std::string(part) + "'");
      out.family = *fam;
      continue;
    }
    static constexpr std::pair<std::string_view, WModelLayer::Kind> kLayers[] = {
        {"dummy", WModelLayer::Kind::dummy},
        {"neutrality", WModelLayer::Kind::neutrality},
        {"epistasis", WModelLayer::Kind::epistasis},
        {"ruggedness", WModelLayer::Kind::ruggedness}};
    bool matched = false;
    for (const auto& [name, kind] : kLayers) {
      if (part.substr(0, name.size()) == name) {
        out.layers.push_back({kind, parse_size(part.substr(name.size()), name)});
        matched = true;
        break;
      }
    }
    if (!matched) throw std::invalid_argument("unknown W-model layer '" + std::string(part) + "'");
  }
  return out;
}

ProblemInstance make_instance(const ProblemKey& key, std::optional<std::size_t> default_dim,
                              std::uint64_t seed) {
  auto d = key.dim ? key.dim : default_dim;
  if (!d) throw std::invalid_argument("problem key '" + key.str() + "' has no dimension");
  return make_instance(key.family, *d, key.layers, seed);
}

}  // namespace metagen
