#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "weatherformer/autodiff/nn.hpp"
#include "weatherformer/flu/tasks.hpp"
#include "weatherformer/model/transformer.hpp"
#include "weatherformer/model/weatherformer.hpp"

namespace wf::flu {

/// Standardization statistics from the training weeks of one split.
struct FluScaler {
  double ili_mean = 0.0, ili_std = 1.0;
  double patients_mean = 0.0, patients_std = 1.0;
  std::array<double, data::kMeasurementCount> weather_mean{};
  std::array<double, data::kMeasurementCount> weather_std{};

  /// Uses weeks [0, train_weeks). Constant columns get std 1.
  static FluScaler fit(const IliSeries& series, std::size_t train_weeks);
  nlohmann::json to_json() const;
};

/// One least-squares regressor per horizon step on
/// [1, ili_t, ili_{t-1}, ..., ili_{t-lags+1}] at the forecast origin t.
class LinregForecaster {
 public:
  explicit LinregForecaster(std::size_t lags = 4, bool intercept = true) : lags_(lags), intercept_(intercept) {}
  void fit(const IliSeries& series, std::span<const ForecastTask> tasks);
  std::vector<double> forecast(const IliSeries& series, const ForecastTask& task) const;
  std::vector<double> features(const IliSeries& series, std::size_t origin) const;
  /// Coefficients of horizon step h (0-based), intercept first.
  const std::vector<double>& coefficients(std::size_t h) const { return coef_.at(h); }
  bool used_ridge() const { return used_ridge_; }

 private:
  std::size_t lags_;
  bool intercept_;
  std::vector<std::vector<double>> coef_;
  bool used_ridge_ = false;
};

enum class FluVariant { kNoWeather, kWeather, kWf };

std::string to_string(FluVariant v);
FluVariant parse_flu_variant(const std::string& name);

struct FluModelConfig {
  FluVariant variant = FluVariant::kWf;
  std::size_t window = 105;
  std::size_t horizon = kHorizon;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 3;
  std::size_t ff_width = 128;
  double dropout = 0.0;
  model::Activation activation = model::Activation::kRelu;
  /// Outputs are cumulative deltas from the last known ILI at every step;
  /// when false only the first output is added to the last known value.
  bool cumulative = true;
  /// Weather columns fed to the model (mean temperature by default).
  std::vector<std::size_t> weather_columns = {data::kT2M};
  model::ModelConfig weather = model::ModelConfig::preset("2m");

  void validate() const;
  nlohmann::json to_json() const;
  static FluModelConfig from_json(const nlohmann::json& j);
};

/// Feature mask with only the configured weather columns unmasked.
model::FeatureMask flu_feature_mask(const FluModelConfig& cfg);

/// Turns raw head outputs (standardized ILI units) into ILI forecasts.
std::vector<double> compose_forecast(std::span<const double> outputs, double last_ili, const FluScaler& scaler,
                                     bool cumulative);

/// Transformer forecaster over the input window; the WF variant first passes
/// the weather through a WeatherFormer (parameters "weatherformer.*").
template <typename T>
class FluForecaster {
 public:
  FluForecaster(ad::ParameterSet<T>& params, const FluModelConfig& cfg, nn::Rng& rng);

  /// 1 x horizon raw outputs. Only weeks of the task's input window are read.
  ad::Var<T> forward(ad::Tape<T>& tape, const IliSeries& series, const FluScaler& scaler, const ForecastTask& task,
                     nn::Rng* dropout_rng = nullptr) const;
  /// MSE between the composed outputs and the standardized targets.
  ad::Var<T> loss(ad::Tape<T>& tape, const IliSeries& series, const FluScaler& scaler, const ForecastTask& task,
                  nn::Rng* dropout_rng = nullptr) const;
  std::vector<double> forecast(const IliSeries& series, const FluScaler& scaler, const ForecastTask& task) const;

  const FluModelConfig& config() const { return cfg_; }
  const model::WeatherFormer<T>* weather_encoder() const { return wf_ ? &*wf_ : nullptr; }
  const nn::Linear<T>& head() const { return head_; }

 private:
  FluModelConfig cfg_;
  std::optional<model::WeatherFormer<T>> wf_;
  nn::Linear<T> in_;
  model::TransformerEncoder<T> encoder_;
  nn::Linear<T> head_;
};

}  // namespace wf::flu
