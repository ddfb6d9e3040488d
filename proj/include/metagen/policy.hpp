#pragma once

// Grammar-constrained autoregressive policy over the token vocabulary.
//
// A sequence is stored without the leading `begin` and ends with `end`
// (the same convention as Program::source_tokens). The model input for a
// sequence a_1..a_n is begin, a_1..a_{n-1}; the logits at input position j
// score a_{j+1}.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "metagen/design_space.hpp"
#include "metagen/rng.hpp"
#include "metagen/transformer.hpp"

namespace metagen {

using Factors = std::optional<std::span<const double>>;

// Elementwise sign(v)·log1p(|v|), applied to raw factors before W_probl.
std::vector<double> transform_factors(std::span<const double> raw);

// Softmax restricted to allowed tokens (additive -inf mask). Forbidden
// entries are exactly 0. Throws std::invalid_argument when nothing is allowed.
std::array<double, kVocabSize> masked_softmax(std::span<const double> logits, const MaskVector& mask);
double masked_log_prob(std::span<const double> logits, const MaskVector& mask, TokenId token);
std::pair<TokenId, double> masked_sample(std::span<const double> logits, const MaskVector& mask, Rng& rng);

struct SampledSequence {
  std::vector<TokenId> tokens;
  double logprob = 0.0;
};

TransformerHyper default_policy_hyper(bool with_factors);

class Policy {
 public:
  explicit Policy(TransformerHyper hyper = default_policy_hyper(false), GrammarOptions grammar = {});

  Transformer& model() { return model_; }
  const Transformer& model() const { return model_; }
  const Grammar& grammar() const { return grammar_; }
  bool uses_factors() const { return model_.hyper().factor_dim > 0; }

  // Raw logits for the token following `prefix` (prefix excludes `begin`).
  std::vector<double> next_logits(std::span<const TokenId> prefix, Factors raw_factors) const;

  SampledSequence sample(Factors raw_factors, Rng& rng) const;

  // Throws GrammarError / std::invalid_argument for sequences the grammar
  // rejects.
  double sequence_logprob(std::span<const TokenId> tokens, Factors raw_factors) const;

  // Adds weight·∇ log p(tokens) into grad; returns log p(tokens).
  double accumulate_logprob_gradient(std::span<const TokenId> tokens, Factors raw_factors, double weight,
                                     std::span<double> grad) const;

  // loss(logprobs, dloss_dlogprobs) -> loss. grad receives d(loss)/d(params)
  // (accumulated). Returns the loss.
  using LossClosure = std::function<double(std::span<const double>, std::span<double>)>;
  double gradient(std::span<const std::vector<TokenId>> sequences, Factors raw_factors, const LossClosure& loss,
                  std::span<double> grad) const;

  // Test hook: added to every logit before masking.
  std::array<double, kVocabSize> logit_bias{};

 private:
  std::vector<TokenId> model_input(std::span<const TokenId> tokens) const;
  std::vector<MaskVector> masks_for(std::span<const TokenId> tokens) const;
  std::optional<std::vector<double>> prepared(Factors raw) const;

  Transformer model_;
  Grammar grammar_;
};

}  // namespace metagen
