#pragma once

#include <string>

#include "weatherformer/autodiff/nn.hpp"
#include "weatherformer/model/config.hpp"
#include "weatherformer/model/encoding.hpp"
#include "weatherformer/model/transformer.hpp"

namespace wf::model {

inline constexpr const char* kModelPrefix = "weatherformer";

/// Weather encoder: scalers and feature mask, input projection, spatiotemporal
/// encoding, transformer stack, output projection. Parameters are registered
/// in a caller-owned set under "<prefix>.*" so that downstream models can hold
/// the encoder and their own heads in one set.
template <typename T>
class WeatherFormer {
 public:
  WeatherFormer(ad::ParameterSet<T>& params, const ModelConfig& cfg, nn::Rng& rng,
                const std::string& prefix = kModelPrefix);

  /// x is N x 31 with 1 <= N <= 365. Masked feature columns and padded rows are
  /// zeroed before use, so their contents never influence the result.
  /// Returns N x out_dim; rows at padded positions carry no meaning.
  ad::Var<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& x, const SpatioTemporalContext& ctx,
                     const FeatureMask& features, const PaddingMask& padding,
                     nn::Rng* dropout_rng = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  ad::Parameter<T>& scalers() const { return *scalers_; }

 private:
  ModelConfig cfg_;
  ad::Parameter<T>* scalers_ = nullptr;
  nn::Linear<T> input_;
  TransformerEncoder<T> encoder_;
  nn::Linear<T> head_;
};

}  // namespace wf::model
