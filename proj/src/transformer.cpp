#include "metagen/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "metagen/rng.hpp"
#include "metagen/simd/kernels.hpp"

namespace metagen {
namespace {

constexpr double kLnEps = 1e-5;

// C (n x m) = A (n x k) * W, W row-major k x m starting at w.
Mat matmul(const Mat& a, const double* w, std::size_t m) {
  Mat c(a.rows, m);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double s = a(i, p);
      if (s != 0.0) simd::axpy(s, {w + p * m, m}, c.row(i));
    }
  return c;
}

// C (n x k) = D (n x m) * W^T, W row-major k x m.
Mat matmul_wt(const Mat& d, const double* w, std::size_t k) {
  Mat c(d.rows, k);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t p = 0; p < k; ++p) c(i, p) = simd::dot(d.row(i), {w + p * d.cols, d.cols});
  return c;
}

// G (k x m) += A^T (k x n) * D (n x m).
void acc_at(const Mat& a, const Mat& d, double* g) {
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double s = a(i, p);
      if (s != 0.0) simd::axpy(s, d.row(i), {g + p * d.cols, d.cols});
    }
}

void add_inplace(Mat& a, const Mat& b) { simd::axpy(1.0, b.data, a.data); }

// Row-wise layer norm; returns normalized input and stores 1/sigma.
Mat layer_norm(const Mat& r, const double* gain, const double* bias, Mat& hat, std::vector<double>& inv_sigma) {
  const std::size_t n = r.cols;
  Mat y(r.rows, n);
  hat = Mat(r.rows, n);
  inv_sigma.assign(r.rows, 0.0);
  for (std::size_t i = 0; i < r.rows; ++i) {
    double mu = 0.0;
    for (double v : r.row(i)) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r.row(i)) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      hat(i, j) = (r(i, j) - mu) * is;
      y(i, j) = gain[j] * hat(i, j) + bias[j];
    }
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const Mat& hat, const std::vector<double>& inv_sigma, const double* gain,
                        double* dgain, double* dbias) {
  const std::size_t n = dy.cols;
  Mat dr(dy.rows, n);
  std::vector<double> dhat(n);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dgain[j] += dy(i, j) * hat(i, j);
      dbias[j] += dy(i, j);
      dhat[j] = dy(i, j) * gain[j];
      m1 += dhat[j];
      m2 += dhat[j] * hat(i, j);
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) dr(i, j) = inv_sigma[i] * (dhat[j] - m1 - hat(i, j) * m2);
  }
  return dr;
}

}  // namespace

void sinusoidal_encoding(std::size_t index, std::span<double> out) {
  const std::size_t d = out.size();
  for (std::size_t i = 0; i < d; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    out[i] = std::sin(static_cast<double>(index) * freq);
    if (i + 1 < d) out[i + 1] = std::cos(static_cast<double>(index) * freq);
  }
}

Transformer::Transformer(TransformerHyper h) : hyper_(h) {
  if (h.d_model == 0 || h.heads == 0 || h.d_model % h.heads != 0)
    throw std::invalid_argument("d_model must be a positive multiple of heads");
  if (h.vocab == 0 || h.blocks == 0 || h.ffn == 0 || h.max_len == 0)
    throw std::invalid_argument("transformer sizes must be positive");
  const std::size_t d = h.d_model;
  seq_ = add_tensor("W_seq", h.vocab, d);
  if (h.factor_dim > 0) probl_ = add_tensor("W_probl", h.factor_dim, d);
  for (std::size_t b = 0; b < h.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockIdx ix{};
    ix.wq = add_tensor(p + "W_q", d, d);
    ix.wk = add_tensor(p + "W_k", d, d);
    ix.wv = add_tensor(p + "W_v", d, d);
    ix.wo = add_tensor(p + "W_o", d, d);
    ix.g1 = add_tensor(p + "ln1.gain", 1, d);
    ix.b1n = add_tensor(p + "ln1.bias", 1, d);
    ix.w1 = add_tensor(p + "ffn.W1", d, h.ffn);
    ix.b1 = add_tensor(p + "ffn.b1", 1, h.ffn);
    ix.w2 = add_tensor(p + "ffn.W2", h.ffn, d);
    ix.b2 = add_tensor(p + "ffn.b2", 1, d);
    ix.g2 = add_tensor(p + "ln2.gain", 1, d);
    ix.b2n = add_tensor(p + "ln2.bias", 1, d);
    block_idx_.push_back(ix);
  }
  out_ = add_tensor("W_l", d, h.vocab);
}

std::size_t Transformer::add_tensor(std::string name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = params_.size();
  tensors_.push_back({std::move(name), offset, rows, cols});
  params_.resize(offset + rows * cols, 0.0);
  return offset;
}

const TensorInfo& Transformer::tensor(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw std::out_of_range("unknown tensor '" + std::string(name) + "'");
}

std::span<double> Transformer::view(std::string_view name) {
  const auto& t = tensor(name);
  return {params_.data() + t.offset, t.size()};
}

std::span<const double> Transformer::view(std::string_view name) const {
  const auto& t = tensor(name);
  return {params_.data() + t.offset, t.size()};
}

void Transformer::init(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& t : tensors_) {
    double* p = params_.data() + t.offset;
    const bool is_gain = t.name.ends_with(".gain");
    const bool is_vector = t.rows == 1;
    if (is_gain) {
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = 1.0;
    } else if (is_vector) {
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = 0.0;
    } else {
      double std = std::sqrt(2.0 / static_cast<double>(t.rows + t.cols));
      if (t.name == "W_l") std = 0.02;
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = std * rng.normal();
    }
  }
}

Mat Transformer::forward(std::span<const std::uint16_t> tokens, std::optional<std::span<const double>> factor,
                         ForwardCache* cache) const {
  const std::size_t d = hyper_.d_model;
  const bool with_factor = factor.has_value();
  if (with_factor && hyper_.factor_dim == 0) throw std::invalid_argument("model has no factor input");
  if (with_factor && factor->size() != hyper_.factor_dim) throw std::invalid_argument("factor size mismatch");
  const std::size_t T = positions(tokens.size(), with_factor);
  if (T == 0) throw std::invalid_argument("empty input");
  if (T > hyper_.max_len)
    throw std::length_error("sequence of " + std::to_string(T) + " positions exceeds max_len " +
                            std::to_string(hyper_.max_len));
  const double* P = params_.data();

  Mat x(T, d);
  std::vector<double> pe(d);
  std::size_t row = 0;
  if (with_factor) {
    for (std::size_t u = 0; u < hyper_.factor_dim; ++u) simd::axpy((*factor)[u], {P + probl_ + u * d, d}, x.row(0));
    if (positional_encoding) {
      sinusoidal_encoding(0, pe);
      simd::axpy(1.0, pe, x.row(0));
    }
    row = 1;
  }
  for (std::size_t j = 0; j < tokens.size(); ++j, ++row) {
    if (tokens[j] >= hyper_.vocab) throw std::out_of_range("token id out of range");
    auto r = x.row(row);
    for (std::size_t c = 0; c < d; ++c) r[c] = P[seq_ + tokens[j] * d + c];
    if (positional_encoding) {
      sinusoidal_encoding(j + 1, pe);
      simd::axpy(1.0, pe, r);
    }
  }

  if (cache) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->factor = with_factor ? std::optional(std::vector<double>(factor->begin(), factor->end())) : std::nullopt;
    cache->blocks.assign(hyper_.blocks, {});
  }

  const std::size_t H = hyper_.heads, hd = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::size_t b = 0; b < hyper_.blocks; ++b) {
    const BlockIdx& ix = block_idx_[b];
    Mat q = matmul(x, P + ix.wq, d), k = matmul(x, P + ix.wk, d), v = matmul(x, P + ix.wv, d);
    Mat heads_out(T, d);
    std::vector<Mat> attn(H, Mat(T, T));
    std::vector<double> s(T);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < T; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          s[j] = scale * simd::dot(q.row(i).subspan(off, hd), k.row(j).subspan(off, hd));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) z += s[j] = std::exp(s[j] - mx);
        for (std::size_t j = 0; j <= i; ++j) {
          const double a = s[j] / z;
          attn[h](i, j) = a;
          simd::axpy(a, v.row(j).subspan(off, hd), heads_out.row(i).subspan(off, hd));
        }
      }
    }
    Mat r1 = matmul(heads_out, P + ix.wo, d);
    add_inplace(r1, x);
    Mat r1_hat;
    std::vector<double> is1;
    Mat x1 = layer_norm(r1, P + ix.g1, P + ix.b1n, r1_hat, is1);
    Mat z = matmul(x1, P + ix.w1, hyper_.ffn);
    Mat act(T, hyper_.ffn);
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t c = 0; c < hyper_.ffn; ++c) {
        z(i, c) += P[ix.b1 + c];
        act(i, c) = z(i, c) > 0.0 ? z(i, c) : 0.0;
      }
    Mat r2 = matmul(act, P + ix.w2, d);
    for (std::size_t i = 0; i < T; ++i) simd::axpy(1.0, {P + ix.b2, d}, r2.row(i));
    add_inplace(r2, x1);
    Mat r2_hat;
    std::vector<double> is2;
    Mat x2 = layer_norm(r2, P + ix.g2, P + ix.b2n, r2_hat, is2);
    if (cache) {
      auto& c = cache->blocks[b];
      c.x_in = std::move(x);
      c.q = std::move(q);
      c.k = std::move(k);
      c.v = std::move(v);
      c.heads_out = std::move(heads_out);
      c.attn = std::move(attn);
      c.r1_hat = std::move(r1_hat);
      c.inv_sigma1 = std::move(is1);
      c.x1 = std::move(x1);
      c.z = std::move(z);
      c.r2_hat = std::move(r2_hat);
      c.inv_sigma2 = std::move(is2);
    }
    x = std::move(x2);
  }
  Mat logits = matmul(x, P + out_, hyper_.vocab);
  if (cache) cache->out = std::move(x);
  return logits;
}

void Transformer::backward(const ForwardCache& cache, const Mat& dlogits, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  const std::size_t d = hyper_.d_model, H = hyper_.heads, hd = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* P = params_.data();
  double* G = grad.data();
  const std::size_t T = cache.out.rows;

  acc_at(cache.out, dlogits, G + out_);
  Mat dx = matmul_wt(dlogits, P + out_, d);

  for (std::size_t bb = hyper_.blocks; bb-- > 0;) {
    const BlockIdx& ix = block_idx_[bb];
    const auto& c = cache.blocks[bb];
    Mat dr2 = layer_norm_backward(dx, c.r2_hat, c.inv_sigma2, P + ix.g2, G + ix.g2, G + ix.b2n);
    // FFN
    Mat act(T, hyper_.ffn);
    for (std::size_t i = 0; i < act.data.size(); ++i) act.data[i] = c.z.data[i] > 0.0 ? c.z.data[i] : 0.0;
    acc_at(act, dr2, G + ix.w2);
    for (std::size_t i = 0; i < T; ++i) simd::axpy(1.0, dr2.row(i), {G + ix.b2, d});
    Mat dz = matmul_wt(dr2, P + ix.w2, hyper_.ffn);
    for (std::size_t i = 0; i < dz.data.size(); ++i)
      if (!(c.z.data[i] > 0.0)) dz.data[i] = 0.0;
    acc_at(c.x1, dz, G + ix.w1);
    for (std::size_t i = 0; i < T; ++i) simd::axpy(1.0, dz.row(i), {G + ix.b1, hyper_.ffn});
    Mat dx1 = matmul_wt(dz, P + ix.w1, d);
    add_inplace(dx1, dr2);
    Mat dr1 = layer_norm_backward(dx1, c.r1_hat, c.inv_sigma1, P + ix.g1, G + ix.g1, G + ix.b1n);
    // attention
    acc_at(c.heads_out, dr1, G + ix.wo);
    Mat dheads = matmul_wt(dr1, P + ix.wo, d);
    Mat dq(T, d), dk(T, d), dv(T, d);
    std::vector<double> da(T);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * hd;
      const Mat& a = c.attn[h];
      for (std::size_t i = 0; i < T; ++i) {
        auto dh = dheads.row(i).subspan(off, hd);
        double dot_ad = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          da[j] = simd::dot(dh, c.v.row(j).subspan(off, hd));
          dot_ad += a(i, j) * da[j];
          simd::axpy(a(i, j), dh, dv.row(j).subspan(off, hd));
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = a(i, j) * (da[j] - dot_ad) * scale;
          if (ds == 0.0) continue;
          simd::axpy(ds, c.k.row(j).subspan(off, hd), dq.row(i).subspan(off, hd));
          simd::axpy(ds, c.q.row(i).subspan(off, hd), dk.row(j).subspan(off, hd));
        }
      }
    }
    acc_at(c.x_in, dq, G + ix.wq);
    acc_at(c.x_in, dk, G + ix.wk);
    acc_at(c.x_in, dv, G + ix.wv);
    Mat dxin = dr1;
    add_inplace(dxin, matmul_wt(dq, P + ix.wq, d));
    add_inplace(dxin, matmul_wt(dk, P + ix.wk, d));
    add_inplace(dxin, matmul_wt(dv, P + ix.wv, d));
    dx = std::move(dxin);
  }

  std::size_t row = 0;
  if (cache.factor) {
    for (std::size_t u = 0; u < hyper_.factor_dim; ++u)
      simd::axpy((*cache.factor)[u], dx.row(0), {G + probl_ + u * d, d});
    row = 1;
  }
  for (std::size_t j = 0; j < cache.tokens.size(); ++j, ++row)
    simd::axpy(1.0, dx.row(row), {G + seq_ + cache.tokens[j] * d, d});
}

}  // namespace metagen
