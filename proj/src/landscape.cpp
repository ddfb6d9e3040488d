#include "metagen/landscape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "metagen/interpreter.hpp"
#include "metagen/rng.hpp"
#include "metagen/simd/kernels.hpp"

namespace metagen {
namespace {

constexpr std::array<std::string_view, kNumFactors> kNames{
    "disp.ratio_mean_02",
    "disp.ratio_mean_05",
    "disp.ratio_mean_10",
    "disp.ratio_mean_25",
    "disp.ratio_median_02",
    "disp.ratio_median_05",
    "disp.ratio_median_10",
    "disp.ratio_median_25",
    "disp.diff_mean_02",
    "disp.diff_mean_05",
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
    "ela_meta.costs_runtime",
    "ic.h_max",
    "ic.eps_s",
    "ic.eps_max",
    "ic.eps_ratio",
    "ic.m0",
    "ic.costs_runtime",
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
    "nbc.costs_runtime",
};

constexpr std::size_t kPairCap = 1000;        // dispersion / nbc subsample
constexpr std::size_t kMetaRowCap = 3000;     // meta-model rows
constexpr std::size_t kInteractionCap = 128;  // interaction columns
constexpr double kRatioCap = 1e6;
// costs_runtime entries count work in units of 1e9 basic operations, so the
// factor vector stays a pure function of the seed.
constexpr double kWorkUnit = 1e9;

std::vector<std::size_t> subsample(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= cap) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(cap);
  return idx;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lo + hi);
}

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) return 0.0;
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double ratio_or(double num, double den, double neutral) {
  if (den == 0.0) return num == 0.0 ? neutral : kRatioCap;
  return std::min(num / den, kRatioCap);
}

std::vector<double> pairwise_distances(const WalkSample& s, std::span<const std::size_t> idx, std::size_t d) {
  std::vector<double> out;
  out.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j)
      out.push_back(static_cast<double>(simd::hamming(s.points[idx[i]], s.points[idx[j]])) /
                    static_cast<double>(d));
  return out;
}

struct Fit {
  double adj_r2 = 0.0;
  Eigen::VectorXd beta;
  bool ridge = false;
};

Fit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Fit fit;
  const auto n = static_cast<double>(x.rows());
  const auto p = static_cast<double>(x.cols() - 1);  // predictors besides the intercept
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd rhs = x.transpose() * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd diag = ldlt.vectorD().cwiseAbs();
  const double dmax = diag.maxCoeff();
  if (ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-10 * std::max(1.0, dmax)) {
    gram.diagonal().array() += 1e-8;
    fit.beta = gram.ldlt().solve(rhs);
    fit.ridge = true;
  } else {
    fit.beta = ldlt.solve(rhs);
  }
  const double ym = y.mean();
  const double sst = (y.array() - ym).square().sum();
  const double sse = (y - x * fit.beta).squaredNorm();
  if (sst <= 1e-12 * std::max(1.0, y.squaredNorm())) {
    fit.adj_r2 = 0.0;
    return fit;
  }
  const double r2 = 1.0 - sse / sst;
  fit.adj_r2 = n - p - 1.0 > 0.0 ? 1.0 - (1.0 - r2) * (n - 1.0) / (n - p - 1.0) : r2;
  return fit;
}

}  // namespace

std::span<const std::string_view> factor_names() { return kNames; }

double FactorVector::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < kNumFactors; ++i)
    if (kNames[i] == name) return values[i];
  throw std::out_of_range("unknown factor '" + std::string(name) + "'");
}

Objective objective_of(const ProblemInstance& instance) {
  return {instance.dim(), [&instance](std::span<const std::uint8_t> x) { return instance.evaluate(x); }};
}

WalkSample random_walk_sample(const Objective& obj, std::uint64_t seed) {
  if (obj.dim == 0) throw std::invalid_argument("walk: dimension must be positive");
  WalkSample s;
  s.seed = seed;
  const std::size_t n = 100 * obj.dim;
  s.points.reserve(n);
  s.fitness.reserve(n);
  Rng rng(seed);
  BitString x(obj.dim);
  for (auto& b : x) b = rng.bit() ? 1 : 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) x[rng.below(obj.dim)] ^= 1;
    s.points.push_back(x);
    s.fitness.push_back(obj.f(x));
  }
  return s;
}

std::array<double, 10> dispersion_features(const WalkSample& s, std::size_t d, std::uint64_t seed) {
  if (s.points.empty()) throw std::invalid_argument("dispersion: empty sample");
  const auto idx = subsample(s.points.size(), kPairCap, seed);
  std::vector<std::size_t> order = idx;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.fitness[a] > s.fitness[b]; });
  const std::vector<double> all = pairwise_distances(s, idx, d);
  const double all_mean = mean(all), all_median = median(all);
  constexpr std::array<double, 4> kQ{0.02, 0.05, 0.10, 0.25};
  std::array<double, 10> out{};
  for (std::size_t k = 0; k < kQ.size(); ++k) {
    const auto m = static_cast<std::size_t>(std::ceil(kQ[k] * static_cast<double>(order.size()) - 1e-9));
    if (m < 2 || all.empty()) {
      out[k] = out[4 + k] = 1.0;
      if (k < 2) out[8 + k] = 0.0;
      continue;
    }
    const std::vector<double> top = pairwise_distances(s, std::span(order).first(m), d);
    const double top_mean = mean(top);
    out[k] = ratio_or(top_mean, all_mean, 1.0);
    out[4 + k] = ratio_or(median(top), all_median, 1.0);
    if (k < 2) out[8 + k] = top_mean - all_mean;
  }
  return out;
}

MetaModelResult meta_model_features(const WalkSample& s, std::size_t d, std::uint64_t seed) {
  MetaModelResult res;
  const auto rows = subsample(s.points.size(), kMetaRowCap, derive_seed(seed, {1}));
  const auto n = static_cast<Eigen::Index>(rows.size());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t total_pairs = d * (d - 1) / 2;
  for (std::size_t pick : subsample(total_pairs, kInteractionCap, derive_seed(seed, {2}))) {
    // invert the row-major upper-triangle index
    std::size_t i = 0, rem = pick;
    while (rem >= d - 1 - i) {
      rem -= d - 1 - i;
      ++i;
    }
    pairs.emplace_back(i, i + 1 + rem);
  }
  std::sort(pairs.begin(), pairs.end());

  const auto cols_lin = static_cast<Eigen::Index>(1 + d);
  const auto cols_int = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd lin(n, cols_lin), inter(n, cols_int);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const BitString& x = s.points[rows[static_cast<std::size_t>(r)]];
    y(r) = s.fitness[rows[static_cast<std::size_t>(r)]];
    lin(r, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) lin(r, static_cast<Eigen::Index>(j + 1)) = x[j];
    for (std::size_t k = 0; k < pairs.size(); ++k)
      inter(r, static_cast<Eigen::Index>(k)) = x[pairs[k].first] * x[pairs[k].second];
  }
  // Squares of 0/1 bits equal the bits, so the quadratic designs are rank
  // deficient by construction and go through the ridge path.
  const Eigen::MatrixXd& squares = lin.rightCols(static_cast<Eigen::Index>(d));

  Eigen::MatrixXd lin_int(n, cols_lin + cols_int);
  lin_int << lin, inter;
  Eigen::MatrixXd quad(n, cols_lin + static_cast<Eigen::Index>(d));
  quad << lin, squares;
  Eigen::MatrixXd quad_int(n, quad.cols() + cols_int);
  quad_int << quad, inter;

  const Fit f_lin = least_squares(lin, y);
  const Fit f_lin_int = least_squares(lin_int, y);
  const Fit f_quad = least_squares(quad, y);
  const Fit f_quad_int = least_squares(quad_int, y);

  const Eigen::VectorXd coef = f_lin.beta.tail(static_cast<Eigen::Index>(d)).cwiseAbs();
  const Eigen::VectorXd qcoef = f_quad.beta.tail(static_cast<Eigen::Index>(d)).cwiseAbs();
  res.values[0] = f_lin.adj_r2;
  res.values[1] = f_lin.beta(0);
  res.values[2] = coef.minCoeff();
  res.values[3] = coef.maxCoeff();
  res.values[4] = ratio_or(coef.maxCoeff(), coef.minCoeff(), 1.0);
  res.values[5] = f_lin_int.adj_r2;
  res.values[6] = f_quad.adj_r2;
  res.values[7] = ratio_or(qcoef.maxCoeff(), qcoef.minCoeff(), 1.0);
  res.values[8] = f_quad_int.adj_r2;
  double work = 0.0;
  for (const auto* m : {&lin, &lin_int, &quad, &quad_int})
    work += static_cast<double>(m->rows()) * static_cast<double>(m->cols() * m->cols());
  res.values[9] = work / kWorkUnit;
  res.ridge_used = f_lin.ridge || f_lin_int.ridge || f_quad.ridge || f_quad_int.ridge;
  return res;
}

std::span<const double> ic_epsilon_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g{0.0};
    for (int k = -50; k <= 60; ++k) g.push_back(std::pow(10.0, k / 10.0));
    return g;
  }();
  return grid;
}

namespace {
std::vector<int> symbols(std::span<const double> f, double eps) {
  std::vector<int> s;
  if (f.size() < 2) return s;
  s.reserve(f.size() - 1);
  for (std::size_t t = 0; t + 1 < f.size(); ++t) {
    const double diff = f[t + 1] - f[t];
    s.push_back(diff > eps ? 1 : (diff < -eps ? -1 : 0));
  }
  return s;
}
}  // namespace

double ic_entropy(std::span<const double> f, double eps) {
  const auto s = symbols(f, eps);
  if (s.size() < 2) return 0.0;
  std::array<double, 9> counts{};
  for (std::size_t t = 0; t + 1 < s.size(); ++t) counts[static_cast<std::size_t>((s[t] + 1) * 3 + (s[t + 1] + 1))] += 1.0;
  const double total = static_cast<double>(s.size() - 1);
  double h = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const double p = counts[static_cast<std::size_t>(a * 3 + b)] / total;
      if (p > 0.0) h -= p * std::log(p) / std::log(6.0);
    }
  return h;
}

double ic_partial_information(std::span<const double> f, double eps) {
  const auto s = symbols(f, eps);
  if (s.empty()) return 0.0;
  int last = 0;
  std::size_t changes = 0;
  for (int v : s) {
    if (v == 0) continue;
    if (last != 0 && v != last) ++changes;
    last = v;
  }
  return static_cast<double>(changes) / static_cast<double>(s.size());
}

std::array<double, 6> info_content_features(const WalkSample& s) {
  const auto grid = ic_epsilon_grid();
  std::array<double, 6> out{};
  double h_max = -1.0, eps_max = 0.0;
  std::optional<double> eps_s, eps_ratio;
  const double m0 = ic_partial_information(s.fitness, 0.0);
  for (double eps : grid) {
    const double h = ic_entropy(s.fitness, eps);
    if (h > h_max) {
      h_max = h;
      eps_max = eps;
    }
    if (!eps_s && h < 0.05) eps_s = eps;
    if (!eps_ratio && m0 > 0.0 && ic_partial_information(s.fitness, eps) < 0.5 * m0) eps_ratio = eps;
  }
  out[0] = std::max(h_max, 0.0);
  out[1] = eps_s.value_or(grid.back());
  out[2] = eps_max;
  out[3] = m0 > 0.0 ? eps_ratio.value_or(grid.back()) : 0.0;
  out[4] = m0;
  out[5] = static_cast<double>(grid.size()) * static_cast<double>(s.fitness.size()) * 2.0 / kWorkUnit;
  return out;
}

std::array<double, 6> nbc_features(const WalkSample& s, std::size_t d, std::uint64_t seed) {
  // distinct points only
  std::vector<std::size_t> unique;
  {
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t i = 0; i < s.points.size(); ++i)
      if (seen.insert(solution_hash(s.points[i])).second) unique.push_back(i);
  }
  const auto pick = subsample(unique.size(), kPairCap, seed);
  std::vector<std::size_t> idx;
  idx.reserve(pick.size());
  for (std::size_t p : pick) idx.push_back(unique[p]);
  const std::size_t m = idx.size();

  std::vector<double> nn, nb, fit;
  for (std::size_t a = 0; a < m; ++a) {
    double best_nn = std::numeric_limits<double>::infinity();
    double best_nb = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      const auto dist = static_cast<double>(simd::hamming(s.points[idx[a]], s.points[idx[b]]));
      best_nn = std::min(best_nn, dist);
      if (s.fitness[idx[b]] > s.fitness[idx[a]]) best_nb = std::min(best_nb, dist);
    }
    if (!std::isfinite(best_nb) || !std::isfinite(best_nn)) continue;  // best point(s)
    nn.push_back(best_nn);
    nb.push_back(best_nb);
    fit.push_back(s.fitness[idx[a]]);
  }
  std::array<double, 6> out{1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  out[5] = static_cast<double>(m) * static_cast<double>(m) * static_cast<double>(d) / kWorkUnit;
  if (nn.size() < 2) return out;
  out[0] = ratio_or(stddev(nn), stddev(nb), 1.0);
  out[1] = ratio_or(mean(nn), mean(nb), 1.0);
  out[2] = correlation(nn, nb);
  std::vector<double> r(nn.size());
  for (std::size_t i = 0; i < nn.size(); ++i) r[i] = nn[i] / nb[i];
  out[3] = ratio_or(stddev(r), mean(r), 0.0);
  out[4] = correlation(nb, fit);
  return out;
}

FactorVector factors_of_walk(const WalkSample& s, std::size_t d, std::uint64_t seed) {
  FactorVector fv;
  const auto disp = dispersion_features(s, d, derive_seed(seed, {label_hash("disp")}));
  const auto meta = meta_model_features(s, d, derive_seed(seed, {label_hash("meta")}));
  const auto ic = info_content_features(s);
  const auto nbc = nbc_features(s, d, derive_seed(seed, {label_hash("nbc")}));
  std::size_t k = 0;
  for (double v : disp) fv.values[k++] = v;
  for (double v : meta.values) fv.values[k++] = v;
  for (double v : ic) fv.values[k++] = v;
  for (double v : nbc) fv.values[k++] = v;
  fv.ridge_used = meta.ridge_used;
  for (double& v : fv.values)
    if (!std::isfinite(v)) v = 0.0;
  return fv;
}

LandscapeAnalysis analyze(const Objective& objective, std::uint64_t master_seed, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("analyze: trials must be positive");
  LandscapeAnalysis out;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t seed = derive_seed(master_seed, {label_hash("landscape"), t});
    out.walks.push_back(random_walk_sample(objective, derive_seed(seed, {0})));
    const FactorVector fv = factors_of_walk(out.walks.back(), objective.dim, derive_seed(seed, {1}));
    for (std::size_t i = 0; i < kNumFactors; ++i) out.factors.values[i] += fv.values[i] / static_cast<double>(trials);
    out.factors.ridge_used |= fv.ridge_used;
  }
  return out;
}

FactorVector compute_factors(const ProblemInstance& instance, std::uint64_t master_seed) {
  return analyze(objective_of(instance), master_seed).factors;
}

}  // namespace metagen
