#pragma once

// Small causal transformer with hand-written reverse mode. Parameters live in
// one flat vector; named tensors are views into it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metagen {

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct TransformerHyper {
  std::size_t vocab = 54;
  std::size_t d_model = 32;
  std::size_t heads = 8;
  std::size_t blocks = 2;
  std::size_t ffn = 128;
  std::size_t max_len = 40;   // positions, including the factor token
  std::size_t factor_dim = 0; // 0 disables the factor token

  bool operator==(const TransformerHyper&) const = default;
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Everything backward() needs from one forward pass.
struct ForwardCache {
  struct Block {
    Mat x_in, q, k, v, heads_out, r1_hat, x1, z, r2_hat, x2;
    std::vector<double> inv_sigma1, inv_sigma2;
    std::vector<Mat> attn;  // per head, T x T (upper triangle zero)
  };
  std::vector<std::uint16_t> tokens;
  std::optional<std::vector<double>> factor;  // transformed factor input
  std::vector<Block> blocks;
  Mat out;  // final hidden states
};

// Token j sits at position j (+1 if a factor token is present) and gets the
// sinusoidal encoding of index j + 1; the factor token gets index 0.
void sinusoidal_encoding(std::size_t index, std::span<double> out);

class Transformer {
 public:
  explicit Transformer(TransformerHyper hyper);

  const TransformerHyper& hyper() const { return hyper_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(std::string_view name) const;
  std::span<double> view(std::string_view name);
  std::span<const double> view(std::string_view name) const;

  // Xavier-normal matrices, unit layer-norm gains, zero biases, small output
  // projection.
  void init(std::uint64_t seed);

  // Logits for every position (rows = tokens.size() + factor-token row).
  // `factor` is used as given (no transformation). Throws on overflow.
  Mat forward(std::span<const std::uint16_t> tokens, std::optional<std::span<const double>> factor,
              ForwardCache* cache = nullptr) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(logits).
  void backward(const ForwardCache& cache, const Mat& dlogits, std::span<double> grad) const;

  std::size_t positions(std::size_t tokens, bool with_factor) const { return tokens + (with_factor ? 1 : 0); }

  // Test hook: drop the positional encoding.
  bool positional_encoding = true;

 private:
  std::size_t add_tensor(std::string name, std::size_t rows, std::size_t cols);

  TransformerHyper hyper_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> params_;
  struct BlockIdx {
    std::size_t wq, wk, wv, wo, g1, b1n, w1, b1, w2, b2, g2, b2n;
  };
  std::size_t seq_ = 0, probl_ = 0, out_ = 0;
  std::vector<BlockIdx> block_idx_;
};

}  // namespace metagen
