#include "weatherformer/model/weatherformer.hpp"

#include <stdexcept>

namespace wf::model {

template <typename T>
WeatherFormer<T>::WeatherFormer(ad::ParameterSet<T>& params, const ModelConfig& cfg, nn::Rng& rng,
                                const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  scalers_ = &params.add(prefix + ".scalers", ad::Tensor<T>(kScalerRows, cfg_.in_dim, T{1}));
  input_ = nn::Linear<T>(params, prefix + ".input", cfg_.in_dim, cfg_.d_model, rng);
  encoder_ = TransformerEncoder<T>(params, prefix + ".encoder", EncoderSpec::from(cfg_), rng);
  head_ = nn::Linear<T>(params, prefix + ".head", cfg_.d_model, cfg_.out_dim, rng);
}

template <typename T>
ad::Var<T> WeatherFormer<T>::forward(ad::Tape<T>& tape, const ad::Tensor<T>& x, const SpatioTemporalContext& ctx,
                                     const FeatureMask& features, const PaddingMask& padding,
                                     nn::Rng* dropout_rng) const {
  const std::size_t n = x.rows();
  if (x.cols() != cfg_.in_dim) throw ad::ShapeError("weatherformer input must have 31 columns");
  if (n == 0 || n > cfg_.max_len) {
    throw std::invalid_argument("sequence length must be in 1..365, got " + std::to_string(n));
  }
  if (padding.size() != n) throw ad::ShapeError("padding mask length differs from sequence length");
  if (padding.real_count() == 0) throw std::invalid_argument("sequence has no real timesteps");
  ctx.validate();

  ad::Tensor<T> clean(n, cfg_.in_dim);
  ad::Tensor<T> mask_row(1, cfg_.in_dim);
  for (std::size_t m = 0; m < cfg_.in_dim; ++m) mask_row[m] = features[m] ? T{1} : T{0};
  for (std::size_t t = 0; t < n; ++t) {
    if (!padding[t]) continue;
    for (std::size_t m = 0; m < cfg_.in_dim; ++m) clean(t, m) = features[m] ? x(t, m) : T{0};
  }
  const std::size_t scaler_row[] = {static_cast<std::size_t>(ctx.granularity_days - 1)};
  auto scale = ad::embedding(tape.parameter(*scalers_), std::span<const std::size_t>(scaler_row));
  auto scaled = ad::mul_row(ad::mul_row(tape.constant(std::move(clean)), scale), tape.constant(std::move(mask_row)));

  auto pe = spatiotemporal_encoding(ctx, n, cfg_.d_model).template cast<T>();
  auto h = ad::add(input_(scaled), tape.constant(std::move(pe)));
  h = encoder_(h, padding.span(), dropout_rng);
  return head_(h);
}

template class WeatherFormer<float>;
template class WeatherFormer<double>;

}  // namespace wf::model
