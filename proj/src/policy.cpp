#include "metagen/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace metagen {

std::vector<double> transform_factors(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::copysign(std::log1p(std::fabs(raw[i])), raw[i]);
  return out;
}

namespace {
// max and log-sum-exp over the allowed entries
std::pair<double, double> masked_lse(std::span<const double> logits, const MaskVector& mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < kVocabSize; ++t)
    if (mask.allowed[t]) mx = std::max(mx, logits[t]);
  if (mx == -std::numeric_limits<double>::infinity()) throw std::invalid_argument("mask allows no token");
  double z = 0.0;
  for (std::size_t t = 0; t < kVocabSize; ++t)
    if (mask.allowed[t]) z += std::exp(logits[t] - mx);
  return {mx, mx + std::log(z)};
}
}  // namespace

std::array<double, kVocabSize> masked_softmax(std::span<const double> logits, const MaskVector& mask) {
  if (logits.size() != kVocabSize) throw std::invalid_argument("logit size mismatch");
  const auto [mx, lse] = masked_lse(logits, mask);
  std::array<double, kVocabSize> p{};
  for (std::size_t t = 0; t < kVocabSize; ++t)
    if (mask.allowed[t]) p[t] = std::exp(logits[t] - lse);
  return p;
}

double masked_log_prob(std::span<const double> logits, const MaskVector& mask, TokenId token) {
  if (token >= kVocabSize || !mask.allowed[token]) throw std::invalid_argument("token not allowed by mask");
  if (mask.count() == 1) return 0.0;
  return logits[token] - masked_lse(logits, mask).second;
}

std::pair<TokenId, double> masked_sample(std::span<const double> logits, const MaskVector& mask, Rng& rng) {
  const auto p = masked_softmax(logits, mask);
  const double u = rng.uniform();
  double acc = 0.0;
  std::optional<TokenId> pick, last;
  for (std::size_t t = 0; t < kVocabSize; ++t) {
    if (!mask.allowed[t]) continue;
    last = static_cast<TokenId>(t);
    acc += p[t];
    if (u < acc) {
      pick = static_cast<TokenId>(t);
      break;
    }
  }
  const TokenId tok = pick.value_or(*last);
  return {tok, masked_log_prob(logits, mask, tok)};
}

TransformerHyper default_policy_hyper(bool with_factors) {
  TransformerHyper h;
  h.vocab = kVocabSize;
  h.d_model = 32;
  h.heads = 8;
  h.blocks = 2;
  h.ffn = 128;
  h.max_len = 40;
  h.factor_dim = with_factors ? 32 : 0;
  return h;
}

Policy::Policy(TransformerHyper hyper, GrammarOptions grammar) : model_(hyper), grammar_(grammar) {
  if (hyper.vocab != kVocabSize) throw std::invalid_argument("policy vocabulary must have 54 tokens");
}

std::optional<std::vector<double>> Policy::prepared(Factors raw) const {
  if (!uses_factors()) {
    if (raw) throw std::invalid_argument("policy was built without a factor input");
    return std::nullopt;
  }
  if (!raw) throw std::invalid_argument("policy requires problem factors");
  return transform_factors(*raw);
}

std::vector<TokenId> Policy::model_input(std::span<const TokenId> tokens) const {
  std::vector<TokenId> in{tok::kBegin};
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) in.push_back(tokens[i]);
  return in;
}

std::vector<MaskVector> Policy::masks_for(std::span<const TokenId> tokens) const {
  if (tokens.empty() || tokens.back() != tok::kEnd) throw std::invalid_argument("sequence must end with `end`");
  std::vector<MaskVector> masks;
  masks.reserve(tokens.size());
  GrammarState st = grammar_.initial_state();
  for (TokenId t : tokens) {
    if (st.phase == Phase::done) throw std::invalid_argument("token after `end`");
    masks.push_back(grammar_.next_mask(st));
    st = grammar_.advance(st, t);
  }
  return masks;
}

std::vector<double> Policy::next_logits(std::span<const TokenId> prefix, Factors raw_factors) const {
  std::vector<TokenId> in{tok::kBegin};
  in.insert(in.end(), prefix.begin(), prefix.end());
  const auto f = prepared(raw_factors);
  const Mat logits = model_.forward(in, f ? std::optional<std::span<const double>>(*f) : std::nullopt);
  auto last = logits.row(logits.rows - 1);
  std::vector<double> y(last.begin(), last.end());
  for (std::size_t t = 0; t < kVocabSize; ++t) y[t] += logit_bias[t];
  return y;
}

SampledSequence Policy::sample(Factors raw_factors, Rng& rng) const {
  SampledSequence out;
  const auto f = prepared(raw_factors);
  const auto fspan = f ? std::optional<std::span<const double>>(*f) : std::nullopt;
  std::vector<TokenId> in{tok::kBegin};
  GrammarState st = grammar_.initial_state();
  while (st.phase != Phase::done) {
    const MaskVector mask = grammar_.next_mask(st);
    TokenId t;
    double lp = 0.0;
    if (mask.count() == 1) {
      t = mask.allowed_tokens().front();
    } else {
      const Mat logits = model_.forward(in, fspan);
      std::vector<double> y(logits.row(logits.rows - 1).begin(), logits.row(logits.rows - 1).end());
      for (std::size_t k = 0; k < kVocabSize; ++k) y[k] += logit_bias[k];
      std::tie(t, lp) = masked_sample(y, mask, rng);
    }
    out.tokens.push_back(t);
    out.logprob += lp;
    st = grammar_.advance(st, t);
    in.push_back(t);
  }
  return out;
}

double Policy::sequence_logprob(std::span<const TokenId> tokens, Factors raw_factors) const {
  const auto masks = masks_for(tokens);
  const auto f = prepared(raw_factors);
  const Mat logits =
      model_.forward(model_input(tokens), f ? std::optional<std::span<const double>>(*f) : std::nullopt);
  const std::size_t off = f ? 1 : 0;
  double total = 0.0;
  std::vector<double> y(kVocabSize);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    if (masks[j].count() == 1) continue;
    auto r = logits.row(j + off);
    for (std::size_t k = 0; k < kVocabSize; ++k) y[k] = r[k] + logit_bias[k];
    total += masked_log_prob(y, masks[j], tokens[j]);
  }
  return total;
}

double Policy::accumulate_logprob_gradient(std::span<const TokenId> tokens, Factors raw_factors, double weight,
                                           std::span<double> grad) const {
  const auto masks = masks_for(tokens);
  const auto f = prepared(raw_factors);
  ForwardCache cache;
  const Mat logits =
      model_.forward(model_input(tokens), f ? std::optional<std::span<const double>>(*f) : std::nullopt, &cache);
  const std::size_t off = f ? 1 : 0;
  Mat dlogits(logits.rows, logits.cols);
  double total = 0.0;
  std::vector<double> y(kVocabSize);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    if (masks[j].count() == 1) continue;
    auto r = logits.row(j + off);
    for (std::size_t k = 0; k < kVocabSize; ++k) y[k] = r[k] + logit_bias[k];
    total += masked_log_prob(y, masks[j], tokens[j]);
    const auto p = masked_softmax(y, masks[j]);
    auto dr = dlogits.row(j + off);
    for (std::size_t k = 0; k < kVocabSize; ++k) dr[k] = -weight * p[k];
    dr[tokens[j]] += weight;
  }
  if (weight != 0.0) model_.backward(cache, dlogits, grad);
  return total;
}

double Policy::gradient(std::span<const std::vector<TokenId>> sequences, Factors raw_factors, const LossClosure& loss,
                        std::span<double> grad) const {
  std::vector<double> lps(sequences.size()), dl(sequences.size(), 0.0);
  for (std::size_t i = 0; i < sequences.size(); ++i) lps[i] = sequence_logprob(sequences[i], raw_factors);
  const double value = loss(lps, dl);
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (dl[i] != 0.0) accumulate_logprob_gradient(sequences[i], raw_factors, dl[i], grad);
  return value;
}

}  // namespace metagen
