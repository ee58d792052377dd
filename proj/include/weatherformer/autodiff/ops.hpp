#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "weatherformer/autodiff/tape.hpp"

// Differentiable operations on 2-D tensors. Every function records its result
// on the tape of its inputs and throws ShapeError on a shape-rule violation or
// NumericError on a non-finite result.
namespace wf::ad {

// Elementwise, identical shapes.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);

// `row` is 1 x a.cols(), broadcast over rows of `a`.
template <typename T> Var<T> add_row(Var<T> a, Var<T> row);
template <typename T> Var<T> mul_row(Var<T> a, Var<T> row);

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// a * b^T without materialising the transpose.
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);

template <typename T> Var<T> relu(Var<T> a);
/// Exact (erf-based) GELU.
template <typename T> Var<T> gelu(Var<T> a);
template <typename T> Var<T> tanh(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);

/// Row-wise softmax. When `key_mask` is non-empty it must have a.cols()
/// entries; columns with a false entry receive exactly zero probability.
template <typename T> Var<T> softmax_rows(Var<T> a, std::span<const bool> key_mask = {});

/// Row-wise layer normalisation with affine gamma/beta (both 1 x cols).
/// eps is added to the variance inside the square root.
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

/// Gathers rows of `table`.
template <typename T> Var<T> embedding(Var<T> table, std::span<const std::size_t> indices);

template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end);
/// Row-major reinterpretation to a new shape with the same element count.
template <typename T> Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols);

template <typename T> Var<T> mean_rows(Var<T> a);
template <typename T> Var<T> sum(Var<T> a);

/// Unfolds a time-major (length x channels) input into
/// (length - kernel + 1) x (kernel * channels) patches.
template <typename T> Var<T> im2col(Var<T> x, std::size_t kernel);
/// Valid 1-D convolution over a time-major (length x in_channels) input.
/// weight is (kernel * in_channels) x out_channels, bias is 1 x out_channels.
template <typename T> Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t kernel);

/// Mean squared error between two same-shaped values.
template <typename T> Var<T> mse(Var<T> pred, Var<T> target);
/// sum(w * (pred - target)^2) / sum(w) with constant target and weights.
template <typename T>
Var<T> weighted_mse(Var<T> pred, const Tensor<T>& target, const Tensor<T>& weights);

/// Inverted dropout; identity when rate == 0.
template <typename T> Var<T> dropout(Var<T> a, double rate, std::mt19937_64& rng);

}  // namespace wf::ad
