#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "weatherformer/autodiff/nn.hpp"
#include "weatherformer/model/config.hpp"

namespace wf::model {

struct EncoderSpec {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t ff_width = 256;
  double dropout = 0.0;
  bool norm_first = false;
  Activation activation = Activation::kRelu;

  static EncoderSpec from(const ModelConfig& c) {
    return {c.d_model, c.n_heads, c.n_layers, c.ff_width, c.dropout, c.norm_first, c.activation};
  }
};

/// Multi-head self-attention with a key padding mask (true = attendable).
/// Masked keys receive exactly zero weight.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ad::ParameterSet<T>& params, const std::string& name, std::size_t d_model,
                     std::size_t n_heads, nn::Rng& rng)
      : heads_(n_heads),
        head_dim_(d_model / n_heads),
        qkv_(params, name + ".qkv", d_model, 3 * d_model, rng),
        out_(params, name + ".out", d_model, d_model, rng) {}

  ad::Var<T> operator()(ad::Var<T> x, std::span<const bool> key_mask) const {
    const std::size_t d = heads_ * head_dim_;
    auto qkv = qkv_(x);
    const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(static_cast<double>(head_dim_)));
    std::vector<ad::Var<T>> ctx;
    ctx.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
      const std::size_t lo = h * head_dim_;
      auto q = ad::slice_cols(qkv, lo, lo + head_dim_);
      auto k = ad::slice_cols(qkv, d + lo, d + lo + head_dim_);
      auto v = ad::slice_cols(qkv, 2 * d + lo, 2 * d + lo + head_dim_);
      auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt), key_mask);
      ctx.push_back(ad::matmul(weights, v));
    }
    return out_(heads_ == 1 ? ctx.front() : ad::concat_cols(ctx));
  }

 private:
  std::size_t heads_ = 1;
  std::size_t head_dim_ = 1;
  nn::Linear<T> qkv_;
  nn::Linear<T> out_;
};

template <typename T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ad::ParameterSet<T>& params, const std::string& name, const EncoderSpec& spec, nn::Rng& rng)
      : spec_(spec),
        attn_(params, name + ".attn", spec.d_model, spec.n_heads, rng),
        ff1_(params, name + ".ff1", spec.d_model, spec.ff_width, rng),
        ff2_(params, name + ".ff2", spec.ff_width, spec.d_model, rng),
        norm1_(params, name + ".norm1", spec.d_model),
        norm2_(params, name + ".norm2", spec.d_model) {}

  ad::Var<T> operator()(ad::Var<T> x, std::span<const bool> key_mask, nn::Rng* dropout_rng) const {
    if (spec_.norm_first) {
      x = ad::add(x, drop(attn_(norm1_(x), key_mask), dropout_rng));
      return ad::add(x, drop(feed_forward(norm2_(x), dropout_rng), dropout_rng));
    }
    x = norm1_(ad::add(x, drop(attn_(x, key_mask), dropout_rng)));
    return norm2_(ad::add(x, drop(feed_forward(x, dropout_rng), dropout_rng)));
  }

 private:
  ad::Var<T> feed_forward(ad::Var<T> x, nn::Rng* dropout_rng) const {
    auto h = ff1_(x);
    h = spec_.activation == Activation::kGelu ? ad::gelu(h) : ad::relu(h);
    return ff2_(drop(h, dropout_rng));
  }
  ad::Var<T> drop(ad::Var<T> x, nn::Rng* rng) const {
    if (rng == nullptr || spec_.dropout <= 0.0) return x;
    return ad::dropout(x, spec_.dropout, *rng);
  }

  EncoderSpec spec_;
  MultiHeadAttention<T> attn_;
  nn::Linear<T> ff1_;
  nn::Linear<T> ff2_;
  nn::LayerNorm<T> norm1_;
  nn::LayerNorm<T> norm2_;
};

/// Stack of encoder layers. Passing a null rng disables dropout.
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ad::ParameterSet<T>& params, const std::string& name, const EncoderSpec& spec, nn::Rng& rng) {
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
      layers_.emplace_back(params, name + ".layer" + std::to_string(l), spec, rng);
    }
  }

  ad::Var<T> operator()(ad::Var<T> x, std::span<const bool> key_mask, nn::Rng* dropout_rng = nullptr) const {
    for (const auto& layer : layers_) x = layer(x, key_mask, dropout_rng);
    return x;
  }

  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<EncoderLayer<T>> layers_;
};

}  // namespace wf::model
