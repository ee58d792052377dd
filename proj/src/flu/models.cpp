#include "weatherformer/flu/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "weatherformer/autodiff/ops.hpp"
#include "weatherformer/util/least_squares.hpp"

namespace wf::flu {

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
  if (!(sd > 1e-12)) sd = 1.0;
}

model::EncoderSpec sequence_spec(const FluModelConfig& c) {
  model::EncoderSpec s;
  s.d_model = c.d_model;
  s.n_heads = c.n_heads;
  s.n_layers = c.n_layers;
  s.ff_width = c.ff_width;
  s.dropout = c.dropout;
  s.activation = c.activation;
  return s;
}

std::size_t input_width(const FluModelConfig& c) {
  switch (c.variant) {
    case FluVariant::kNoWeather: return 2;
    case FluVariant::kWeather: return 2 + c.weather_columns.size();
    case FluVariant::kWf: return 2 + c.weather.out_dim;
  }
  return 2;
}

}  // namespace

FluScaler FluScaler::fit(const IliSeries& series, std::size_t train_weeks) {
  if (train_weeks == 0 || train_weeks > series.size()) throw std::invalid_argument("flu scaler needs training weeks");
  FluScaler s;
  std::vector<double> ili, pat;
  for (std::size_t i = 0; i < train_weeks; ++i) {
    ili.push_back(series.weeks[i].ili_percent);
    pat.push_back(series.weeks[i].patients);
  }
  mean_std(ili, s.ili_mean, s.ili_std);
  mean_std(pat, s.patients_mean, s.patients_std);
  s.weather_std.fill(1.0);
  if (!series.weather.empty()) {
    for (std::size_t m = 0; m < data::kMeasurementCount; ++m) {
      std::vector<double> col;
      for (std::size_t i = 0; i < train_weeks; ++i) col.push_back(series.weather[i][m]);
      mean_std(col, s.weather_mean[m], s.weather_std[m]);
    }
  }
  return s;
}

nlohmann::json FluScaler::to_json() const {
  return {{"ili_mean", ili_mean},           {"ili_std", ili_std},          {"patients_mean", patients_mean},
          {"patients_std", patients_std}, {"weather_mean", weather_mean}, {"weather_std", weather_std}};
}

std::vector<double> LinregForecaster::features(const IliSeries& series, std::size_t origin) const {
  if (origin + 1 < lags_ || origin >= series.size()) throw std::out_of_range("not enough history for the lags");
  std::vector<double> f;
  if (intercept_) f.push_back(1.0);
  for (std::size_t l = 0; l < lags_; ++l) f.push_back(series.weeks[origin - l].ili_percent);
  return f;
}

void LinregForecaster::fit(const IliSeries& series, std::span<const ForecastTask> tasks) {
  if (tasks.empty()) throw std::invalid_argument("linear regression needs training tasks");
  const std::size_t horizon = tasks.front().horizon;
  const std::size_t cols = lags_ + (intercept_ ? 1 : 0);
  if (cols == 0) throw std::invalid_argument("linear regression has no features");
  std::vector<double> design;
  for (const auto& t : tasks) {
    check_no_leak(t);
    const auto f = features(series, t.origin);
    design.insert(design.end(), f.begin(), f.end());
  }
  coef_.clear();
  used_ridge_ = false;
  for (std::size_t h = 0; h < horizon; ++h) {
    std::vector<double> y;
    for (const auto& t : tasks) y.push_back(series.weeks.at(t.origin + 1 + h).ili_percent);
    auto fit = util::least_squares(design, tasks.size(), cols, y);
    used_ridge_ |= fit.used_ridge;
    coef_.push_back(std::move(fit.coefficients));
  }
}

std::vector<double> LinregForecaster::forecast(const IliSeries& series, const ForecastTask& task) const {
  if (coef_.empty()) throw std::logic_error("linear regression is not fitted");
  check_no_leak(task);
  const auto f = features(series, task.origin);
  std::vector<double> out;
  for (const auto& c : coef_) {
    double v = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) v += c[k] * f[k];
    out.push_back(v);
  }
  return out;
}

std::string to_string(FluVariant v) {
  switch (v) {
    case FluVariant::kNoWeather: return "transformer";
    case FluVariant::kWeather: return "transformer-weather";
    case FluVariant::kWf: return "wf-transformer";
  }
  return "?";
}

FluVariant parse_flu_variant(const std::string& name) {
  for (auto v : {FluVariant::kNoWeather, FluVariant::kWeather, FluVariant::kWf}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown flu variant '" + name +
                              "' (expected transformer, transformer-weather or wf-transformer)");
}

void FluModelConfig::validate() const {
  if (horizon == 0 || window == 0) throw std::invalid_argument("flu window and horizon must be positive");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0 || d_model % 4 != 0) {
    throw std::invalid_argument("flu d_model must be divisible by 4 and by n_heads");
  }
  if (ff_width == 0) throw std::invalid_argument("flu ff_width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("flu dropout must be in [0, 1)");
  if (variant != FluVariant::kNoWeather && weather_columns.empty()) {
    throw std::invalid_argument("weather variants need at least one weather column");
  }
  for (auto m : weather_columns) {
    if (m >= data::kMeasurementCount) throw std::invalid_argument("weather column out of range");
  }
  if (variant == FluVariant::kWf) {
    weather.validate();
    if (window > weather.max_len) throw std::invalid_argument("window exceeds the weather encoder length");
  }
}

nlohmann::json FluModelConfig::to_json() const {
  nlohmann::json j = {{"variant", to_string(variant)}, {"window", window},         {"horizon", horizon},
                      {"d_model", d_model},             {"n_heads", n_heads},       {"n_layers", n_layers},
                      {"ff_width", ff_width},           {"dropout", dropout},       {"cumulative", cumulative},
                      {"activation", activation == model::Activation::kGelu ? "gelu" : "relu"},
                      {"weather_columns", weather_columns}};
  if (variant == FluVariant::kWf) j["weather"] = weather.to_json();
  return j;
}

FluModelConfig FluModelConfig::from_json(const nlohmann::json& j) {
  FluModelConfig c;
  c.variant = parse_flu_variant(j.at("variant").get<std::string>());
  c.window = j.value("window", c.window);
  c.horizon = j.value("horizon", c.horizon);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.ff_width = j.value("ff_width", c.ff_width);
  c.dropout = j.value("dropout", c.dropout);
  c.cumulative = j.value("cumulative", c.cumulative);
  const auto act = j.value("activation", std::string("relu"));
  if (act != "relu" && act != "gelu") throw std::invalid_argument("flu activation must be relu or gelu");
  c.activation = act == "gelu" ? model::Activation::kGelu : model::Activation::kRelu;
  c.weather_columns = j.value("weather_columns", c.weather_columns);
  if (j.contains("weather")) c.weather = model::ModelConfig::from_json(j.at("weather"));
  c.validate();
  return c;
}

model::FeatureMask flu_feature_mask(const FluModelConfig& cfg) {
  model::FeatureMask m{};
  for (auto c : cfg.weather_columns) m[c] = true;
  return m;
}

std::vector<double> compose_forecast(std::span<const double> outputs, double last_ili, const FluScaler& scaler,
                                     bool cumulative) {
  std::vector<double> out(outputs.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (cumulative || k == 0) {
      acc += outputs[k];
      out[k] = last_ili + scaler.ili_std * acc;
    } else {
      out[k] = scaler.ili_mean + scaler.ili_std * outputs[k];
    }
  }
  return out;
}

template <typename T>
FluForecaster<T>::FluForecaster(ad::ParameterSet<T>& params, const FluModelConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.variant == FluVariant::kWf) wf_.emplace(params, cfg_.weather, rng);
  in_ = nn::Linear<T>(params, "flu.input", input_width(cfg_), cfg_.d_model, rng);
  encoder_ = model::TransformerEncoder<T>(params, "flu.encoder", sequence_spec(cfg_), rng);
  head_ = nn::Linear<T>(params, "flu.head", cfg_.d_model, cfg_.horizon, rng);
}

template <typename T>
ad::Var<T> FluForecaster<T>::forward(ad::Tape<T>& tape, const IliSeries& series, const FluScaler& scaler,
                                     const ForecastTask& task, nn::Rng* dropout_rng) const {
  if (task.window < cfg_.window) {
    throw std::invalid_argument("task window " + std::to_string(task.window) + " is shorter than the configured " +
                                std::to_string(cfg_.window));
  }
  check_no_leak(task);
  const std::size_t w = cfg_.window;
  const std::size_t begin = task.origin + 1 - w;
  if (task.origin >= series.size()) throw std::out_of_range("task origin beyond the series");
  if (cfg_.variant != FluVariant::kNoWeather && series.weather.size() != series.size()) {
    throw std::invalid_argument("weather variant needs aligned weekly weather");
  }

  ad::Tensor<T> base(w, 2);
  for (std::size_t r = 0; r < w; ++r) {
    const auto& wk = series.weeks[begin + r];
    base(r, 0) = static_cast<T>((wk.ili_percent - scaler.ili_mean) / scaler.ili_std);
    base(r, 1) = static_cast<T>((wk.patients - scaler.patients_mean) / scaler.patients_std);
  }
  auto weather_value = [&](std::size_t r, std::size_t m) {
    return static_cast<T>((series.weather[begin + r][m] - scaler.weather_mean[m]) / scaler.weather_std[m]);
  };

  model::SpatioTemporalContext ctx;
  ctx.latitude = series.latitude;
  ctx.longitude = series.longitude;
  const auto first_week = series.weeks[begin].week;
  ctx.year = first_week.year;
  ctx.start_day_index = data::day_index(first_week.start());
  ctx.granularity_days = 7;

  ad::Var<T> x = tape.constant(std::move(base));
  if (cfg_.variant == FluVariant::kWeather) {
    ad::Tensor<T> extra(w, cfg_.weather_columns.size());
    for (std::size_t r = 0; r < w; ++r) {
      for (std::size_t k = 0; k < cfg_.weather_columns.size(); ++k) extra(r, k) = weather_value(r, cfg_.weather_columns[k]);
    }
    x = ad::concat_cols(std::vector<ad::Var<T>>{x, tape.constant(std::move(extra))});
  } else if (cfg_.variant == FluVariant::kWf) {
    ad::Tensor<T> full(w, data::kMeasurementCount);
    for (std::size_t r = 0; r < w; ++r) {
      for (auto m : cfg_.weather_columns) full(r, m) = weather_value(r, m);
    }
    auto encoded = wf_->forward(tape, full, ctx, flu_feature_mask(cfg_), model::PaddingMask(w), dropout_rng);
    x = ad::concat_cols(std::vector<ad::Var<T>>{x, encoded});
  }
  auto pe = model::spatiotemporal_encoding(ctx, w, cfg_.d_model).template cast<T>();
  auto h = ad::add(in_(x), tape.constant(std::move(pe)));
  const model::PaddingMask all(w);
  h = encoder_(h, all.span(), dropout_rng);
  return head_(ad::slice_rows(h, w - 1, w));
}

template <typename T>
ad::Var<T> FluForecaster<T>::loss(ad::Tape<T>& tape, const IliSeries& series, const FluScaler& scaler,
                                  const ForecastTask& task, nn::Rng* dropout_rng) const {
  const std::size_t hz = cfg_.horizon;
  if (task.horizon != hz) throw std::invalid_argument("task horizon differs from the model horizon");
  if (task.target_end() > series.size()) throw std::out_of_range("task target beyond the series");
  auto out = forward(tape, series, scaler, task, dropout_rng);
  const double last = series.weeks[task.origin].ili_percent;
  ad::Tensor<T> target(1, hz);
  for (std::size_t k = 0; k < hz; ++k) {
    const double v = series.weeks[task.origin + 1 + k].ili_percent;
    const bool delta = cfg_.cumulative || k == 0;
    target[k] = static_cast<T>(delta ? (v - last) / scaler.ili_std : (v - scaler.ili_mean) / scaler.ili_std);
  }
  if (cfg_.cumulative) {
    ad::Tensor<T> upper(hz, hz);
    for (std::size_t j = 0; j < hz; ++j) {
      for (std::size_t k = j; k < hz; ++k) upper(j, k) = T(1);
    }
    out = ad::matmul(out, tape.constant(std::move(upper)));
  }
  return ad::mse(out, tape.constant(std::move(target)));
}

template <typename T>
std::vector<double> FluForecaster<T>::forecast(const IliSeries& series, const FluScaler& scaler,
                                               const ForecastTask& task) const {
  ad::Tape<T> tape;
  const auto out = forward(tape, series, scaler, task).value();
  std::vector<double> raw(out.values().begin(), out.values().end());
  return compose_forecast(raw, series.weeks[task.origin].ili_percent, scaler, cfg_.cumulative);
}

template class FluForecaster<float>;
template class FluForecaster<double>;

}  // namespace wf::flu
