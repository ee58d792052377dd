#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "weatherformer/autodiff/ops.hpp"
#include "weatherformer/autodiff/parameter.hpp"

// Small parameterised layers. Weights are drawn from
// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
namespace wf::nn {

using Rng = std::mt19937_64;

template <typename T>
ad::Tensor<T> uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

/// y = x W + b with W stored as (in x out).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ad::ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
         Rng& rng)
      : weight_(&params.add(name + ".weight", uniform_init<T>(in, out, in, rng))),
        bias_(&params.add(name + ".bias", ad::Tensor<T>(1, out))) {}

  ad::Var<T> operator()(ad::Var<T> x) const {
    auto& tape = x.tape();
    return ad::add_row(ad::matmul(x, tape.parameter(*weight_)), tape.parameter(*bias_));
  }

  std::size_t in_features() const { return weight_->value.rows(); }
  std::size_t out_features() const { return weight_->value.cols(); }
  ad::Parameter<T>& weight() const { return *weight_; }
  ad::Parameter<T>& bias() const { return *bias_; }

 private:
  ad::Parameter<T>* weight_ = nullptr;
  ad::Parameter<T>* bias_ = nullptr;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ad::ParameterSet<T>& params, const std::string& name, std::size_t width)
      : gamma_(&params.add(name + ".gamma", ad::Tensor<T>(1, width, T{1}))),
        beta_(&params.add(name + ".beta", ad::Tensor<T>(1, width))) {}

  ad::Var<T> operator()(ad::Var<T> x) const {
    auto& tape = x.tape();
    return ad::layer_norm(x, tape.parameter(*gamma_), tape.parameter(*beta_), T(1e-5));
  }

 private:
  ad::Parameter<T>* gamma_ = nullptr;
  ad::Parameter<T>* beta_ = nullptr;
};

/// Valid 1-D convolution over time-major (length x channels) input.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ad::ParameterSet<T>& params, const std::string& name, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, Rng& rng)
      : kernel_(kernel),
        weight_(&params.add(name + ".weight",
                            uniform_init<T>(kernel * in_channels, out_channels,
                                            kernel * in_channels, rng))),
        bias_(&params.add(name + ".bias", ad::Tensor<T>(1, out_channels))) {}

  ad::Var<T> operator()(ad::Var<T> x) const {
    auto& tape = x.tape();
    return ad::conv1d(x, tape.parameter(*weight_), tape.parameter(*bias_), kernel_);
  }

  std::size_t output_length(std::size_t input_length) const { return input_length - kernel_ + 1; }

 private:
  std::size_t kernel_ = 1;
  ad::Parameter<T>* weight_ = nullptr;
  ad::Parameter<T>* bias_ = nullptr;
};

/// Single-layer LSTM cell. Gate order in the fused weights is
/// input, forget, cell, output; the forget-gate bias starts at 1.
template <typename T>
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ad::ParameterSet<T>& params, const std::string& name, std::size_t input,
           std::size_t hidden, Rng& rng)
      : hidden_(hidden),
        w_input_(&params.add(name + ".w_input", uniform_init<T>(input, 4 * hidden, hidden, rng))),
        w_hidden_(
            &params.add(name + ".w_hidden", uniform_init<T>(hidden, 4 * hidden, hidden, rng))),
        bias_(&params.add(name + ".bias", forget_bias(hidden))) {}

  struct State {
    ad::Var<T> h;
    ad::Var<T> c;
  };

  State zero_state(ad::Tape<T>& tape) const {
    return {tape.constant(ad::Tensor<T>(1, hidden_)), tape.constant(ad::Tensor<T>(1, hidden_))};
  }

  /// x is 1 x input.
  State operator()(ad::Var<T> x, const State& prev) const {
    auto& tape = x.tape();
    auto gates = ad::add_row(ad::add(ad::matmul(x, tape.parameter(*w_input_)),
                                     ad::matmul(prev.h, tape.parameter(*w_hidden_))),
                             tape.parameter(*bias_));
    const std::size_t h = hidden_;
    auto i = ad::sigmoid(ad::slice_cols(gates, 0, h));
    auto f = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
    auto g = ad::tanh(ad::slice_cols(gates, 2 * h, 3 * h));
    auto o = ad::sigmoid(ad::slice_cols(gates, 3 * h, 4 * h));
    auto c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
    auto hn = ad::mul(o, ad::tanh(c));
    return {hn, c};
  }

  std::size_t hidden_size() const { return hidden_; }

 private:
  static ad::Tensor<T> forget_bias(std::size_t hidden) {
    ad::Tensor<T> b(1, 4 * hidden);
    for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = T{1};
    return b;
  }

  std::size_t hidden_ = 0;
  ad::Parameter<T>* w_input_ = nullptr;
  ad::Parameter<T>* w_hidden_ = nullptr;
  ad::Parameter<T>* bias_ = nullptr;
};

}  // namespace wf::nn
