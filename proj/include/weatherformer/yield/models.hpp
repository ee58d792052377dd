#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "weatherformer/autodiff/nn.hpp"
#include "weatherformer/model/transformer.hpp"
#include "weatherformer/model/weatherformer.hpp"
#include "weatherformer/yield/dataset.hpp"

namespace wf::yield {

enum class YieldVariant { kLinearRegression, kCnnRnn, kCnnTransformer, kWfLinear, kWfTransformer };

std::string to_string(YieldVariant v);
YieldVariant parse_yield_variant(const std::string& name);
std::size_t default_history(YieldVariant v);

struct YieldModelConfig {
  YieldVariant variant = YieldVariant::kWfTransformer;
  std::size_t history = 7;
  std::size_t practice_count = 0;
  /// Weather encoder of the WF variants (must match a pretraining checkpoint).
  model::ModelConfig weather = model::ModelConfig::preset("2m");
  std::size_t year_features = 120;
  std::size_t soil_features = 40;
  std::size_t weather_cnn_features = 40;
  std::size_t lstm_hidden = 64;
  /// Encoder over the per-year blocks (WF+Transformer, CNN-Transformer).
  std::size_t seq_d_model = 64;
  std::size_t seq_heads = 4;
  std::size_t seq_layers = 2;
  std::size_t seq_ff = 128;

  static YieldModelConfig for_variant(YieldVariant v);
  void validate() const;
  nlohmann::json to_json() const;
  static YieldModelConfig from_json(const nlohmann::json& j);
};

/// Two valid convolutions over the depth axis (properties as channels), then
/// flatten and project.
template <typename T>
class SoilCnn {
 public:
  SoilCnn() = default;
  SoilCnn(ad::ParameterSet<T>& params, const std::string& name, std::size_t out, nn::Rng& rng);
  /// soil is 6 x 10; returns 1 x out.
  ad::Var<T> operator()(ad::Var<T> soil) const;

 private:
  nn::Conv1d<T> conv1_, conv2_;
  nn::Linear<T> proj_;
};

/// Temporal CNN over one year of weekly weather (52 x 6 -> 1 x out).
template <typename T>
class WeatherCnn {
 public:
  WeatherCnn() = default;
  WeatherCnn(ad::ParameterSet<T>& params, const std::string& name, std::size_t out, nn::Rng& rng);
  ad::Var<T> operator()(ad::Var<T> weather) const;

 private:
  nn::Conv1d<T> conv1_, conv2_;
  nn::Linear<T> proj_;
};

/// Rows of per-year encodings: the spatiotemporal encoding evaluated on
/// January 1st of each year at the county location.
ad::Tensor<double> year_encoding(double latitude, double longitude, const std::vector<int>& years, std::size_t d_model);

/// Places the six yield weather columns into their 31-wide slots.
template <typename T>
ad::Tensor<T> expand_weather(const ad::Tensor<float>& weekly);

model::FeatureMask yield_feature_mask();

/// All neural yield variants. Output is 1 x 1 standardized yield.
template <typename T>
class YieldNet {
 public:
  YieldNet(ad::ParameterSet<T>& params, const YieldModelConfig& cfg, nn::Rng& rng);

  ad::Var<T> forward(ad::Tape<T>& tape, const YieldSample& sample, nn::Rng* dropout_rng = nullptr) const;
  /// Block features of one year (1 x block width), exposed for tests.
  ad::Var<T> year_block(ad::Tape<T>& tape, const YieldSample& sample, std::size_t k, ad::Var<T> soil,
                        nn::Rng* dropout_rng) const;

  const YieldModelConfig& config() const { return cfg_; }
  std::size_t block_width() const;
  const nn::Linear<T>& output_layer() const { return out_; }
  /// Null for the CNN variants.
  const model::WeatherFormer<T>* weather_encoder() const { return wf_ ? &*wf_ : nullptr; }

 private:
  YieldModelConfig cfg_;
  SoilCnn<T> soil_;
  std::optional<model::WeatherFormer<T>> wf_;
  nn::Linear<T> wf_reduce_;
  WeatherCnn<T> weather_cnn_;
  nn::LstmCell<T> lstm_;
  nn::Linear<T> seq_in_;
  model::TransformerEncoder<T> seq_;
  nn::Linear<T> out_;
};

/// Least squares on flattened standardized features: per history year the
/// 52 x 6 weather and the input yield, plus soil, practices and an intercept.
class LinearYieldModel {
 public:
  explicit LinearYieldModel(std::size_t history) : history_(history) {}
  void fit(const std::vector<YieldSample>& samples);
  /// Standardized prediction.
  double predict(const YieldSample& sample) const;
  std::vector<double> features(const YieldSample& sample) const;
  bool used_ridge() const { return used_ridge_; }
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::size_t history_;
  std::vector<double> coef_;
  bool used_ridge_ = false;
};

}  // namespace wf::yield
