#include "weatherformer/yield/models.hpp"

#include <stdexcept>

#include "weatherformer/data/series.hpp"
#include "weatherformer/util/least_squares.hpp"

namespace wf::yield {

std::string to_string(YieldVariant v) {
  switch (v) {
    case YieldVariant::kLinearRegression: return "linear-regression";
    case YieldVariant::kCnnRnn: return "cnn-rnn";
    case YieldVariant::kCnnTransformer: return "cnn-transformer";
    case YieldVariant::kWfLinear: return "wf-linear";
    case YieldVariant::kWfTransformer: return "wf-transformer";
  }
  return "unknown";
}

YieldVariant parse_yield_variant(const std::string& name) {
  for (auto v : {YieldVariant::kLinearRegression, YieldVariant::kCnnRnn, YieldVariant::kCnnTransformer,
                 YieldVariant::kWfLinear, YieldVariant::kWfTransformer}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown yield variant '" + name + "'");
}

std::size_t default_history(YieldVariant v) {
  switch (v) {
    case YieldVariant::kWfLinear: return 3;
    case YieldVariant::kWfTransformer: return 7;
    case YieldVariant::kCnnTransformer: return 7;
    case YieldVariant::kCnnRnn: return 5;
    case YieldVariant::kLinearRegression: return 3;
  }
  return 3;
}

YieldModelConfig YieldModelConfig::for_variant(YieldVariant v) {
  YieldModelConfig c;
  c.variant = v;
  c.history = default_history(v);
  return c;
}

void YieldModelConfig::validate() const {
  if (history < 1 || history > 7) throw std::invalid_argument("yield history must be 1..7 years");
  weather.validate();
  if (weather.in_dim != data::kMeasurementCount) throw std::invalid_argument("weather encoder must take 31 inputs");
  if (year_features == 0 || soil_features == 0 || weather_cnn_features == 0 || lstm_hidden == 0) {
    throw std::invalid_argument("yield feature widths must be positive");
  }
  if (seq_d_model == 0 || seq_d_model % 4 != 0 || seq_heads == 0 || seq_d_model % seq_heads != 0 || seq_ff == 0) {
    throw std::invalid_argument("sequence encoder needs d_model divisible by 4 and by the head count");
  }
}

nlohmann::json YieldModelConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"history", history},
          {"practice_count", practice_count},
          {"weather", weather.to_json()},
          {"year_features", year_features},
          {"soil_features", soil_features},
          {"weather_cnn_features", weather_cnn_features},
          {"lstm_hidden", lstm_hidden},
          {"seq_d_model", seq_d_model},
          {"seq_heads", seq_heads},
          {"seq_layers", seq_layers},
          {"seq_ff", seq_ff}};
}

YieldModelConfig YieldModelConfig::from_json(const nlohmann::json& j) {
  YieldModelConfig c = for_variant(parse_yield_variant(j.at("variant").get<std::string>()));
  c.history = j.value("history", c.history);
  c.practice_count = j.value("practice_count", c.practice_count);
  if (j.contains("weather")) c.weather = model::ModelConfig::from_json(j.at("weather"));
  c.year_features = j.value("year_features", c.year_features);
  c.soil_features = j.value("soil_features", c.soil_features);
  c.weather_cnn_features = j.value("weather_cnn_features", c.weather_cnn_features);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.seq_d_model = j.value("seq_d_model", c.seq_d_model);
  c.seq_heads = j.value("seq_heads", c.seq_heads);
  c.seq_layers = j.value("seq_layers", c.seq_layers);
  c.seq_ff = j.value("seq_ff", c.seq_ff);
  c.validate();
  return c;
}

template <typename T>
SoilCnn<T>::SoilCnn(ad::ParameterSet<T>& params, const std::string& name, std::size_t out, nn::Rng& rng)
    : conv1_(params, name + ".conv1", kSoilProperties, 16, 3, rng),
      conv2_(params, name + ".conv2", 16, 16, 3, rng),
      proj_(params, name + ".proj", (kSoilDepths - 4) * 16, out, rng) {}

template <typename T>
ad::Var<T> SoilCnn<T>::operator()(ad::Var<T> soil) const {
  const auto& v = soil.value();
  if (v.rows() != kSoilDepths || v.cols() != kSoilProperties) {
    throw ad::ShapeError("soil input must be 6 depths x 10 properties, got " + v.shape().str());
  }
  auto h = ad::relu(conv2_(ad::relu(conv1_(soil))));
  return proj_(ad::reshape(h, 1, h.value().size()));
}

template <typename T>
WeatherCnn<T>::WeatherCnn(ad::ParameterSet<T>& params, const std::string& name, std::size_t out, nn::Rng& rng)
    : conv1_(params, name + ".conv1", kWeatherVars, 8, 3, rng),
      conv2_(params, name + ".conv2", 8, 8, 3, rng),
      proj_(params, name + ".proj", (kWeeks - 4) * 8, out, rng) {}

template <typename T>
ad::Var<T> WeatherCnn<T>::operator()(ad::Var<T> weather) const {
  auto h = ad::relu(conv2_(ad::relu(conv1_(weather))));
  return proj_(ad::reshape(h, 1, h.value().size()));
}

ad::Tensor<double> year_encoding(double latitude, double longitude, const std::vector<int>& years,
                                 std::size_t d_model) {
  ad::Tensor<double> out(years.size(), d_model);
  for (std::size_t k = 0; k < years.size(); ++k) {
    model::SpatioTemporalContext ctx;
    ctx.latitude = latitude;
    ctx.longitude = longitude;
    ctx.year = years[k];
    ctx.start_day_index = data::day_index(data::make_date(years[k], 1, 1));
    const auto row = model::spatiotemporal_encoding(ctx, 1, d_model);
    for (std::size_t c = 0; c < d_model; ++c) out(k, c) = row[c];
  }
  return out;
}

template <typename T>
ad::Tensor<T> expand_weather(const ad::Tensor<float>& weekly) {
  if (weekly.rows() != kWeeks || weekly.cols() != kWeatherVars) {
    throw ad::ShapeError("weekly weather must be 52 x 6, got " + weekly.shape().str());
  }
  ad::Tensor<T> x(kWeeks, data::kMeasurementCount);
  for (std::size_t w = 0; w < kWeeks; ++w) {
    for (std::size_t v = 0; v < kWeatherVars; ++v) x(w, kWeatherSlots[v]) = static_cast<T>(weekly(w, v));
  }
  return x;
}

model::FeatureMask yield_feature_mask() {
  model::FeatureMask m{};
  for (std::size_t slot : kWeatherSlots) m[slot] = true;
  return m;
}

namespace {

bool uses_wf(YieldVariant v) { return v == YieldVariant::kWfLinear || v == YieldVariant::kWfTransformer; }

}  // namespace

template <typename T>
YieldNet<T>::YieldNet(ad::ParameterSet<T>& params, const YieldModelConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.variant == YieldVariant::kLinearRegression) {
    throw std::invalid_argument("linear regression is fitted in closed form, not as a network");
  }
  soil_ = SoilCnn<T>(params, "yield.soil", cfg_.soil_features, rng);
  if (uses_wf(cfg_.variant)) {
    wf_.emplace(params, cfg_.weather, rng, model::kModelPrefix);
    wf_reduce_ = nn::Linear<T>(params, "yield.weather_reduce", cfg_.weather.out_dim, cfg_.year_features, rng);
  } else {
    weather_cnn_ = WeatherCnn<T>(params, "yield.weather_cnn", cfg_.weather_cnn_features, rng);
  }
  const std::size_t block = block_width();
  switch (cfg_.variant) {
    case YieldVariant::kWfLinear:
      out_ = nn::Linear<T>(params, "yield.out", cfg_.history * block, 1, rng);
      break;
    case YieldVariant::kCnnRnn:
      lstm_ = nn::LstmCell<T>(params, "yield.lstm", block, cfg_.lstm_hidden, rng);
      out_ = nn::Linear<T>(params, "yield.out", cfg_.lstm_hidden, 1, rng);
      break;
    default: {
      seq_in_ = nn::Linear<T>(params, "yield.seq_in", block, cfg_.seq_d_model, rng);
      model::EncoderSpec spec;
      spec.d_model = cfg_.seq_d_model;
      spec.n_heads = cfg_.seq_heads;
      spec.n_layers = cfg_.seq_layers;
      spec.ff_width = cfg_.seq_ff;
      spec.dropout = cfg_.weather.dropout;
      spec.activation = cfg_.weather.activation;
      seq_ = model::TransformerEncoder<T>(params, "yield.seq", spec, rng);
      out_ = nn::Linear<T>(params, "yield.out", cfg_.seq_d_model, 1, rng);
    }
  }
}

template <typename T>
std::size_t YieldNet<T>::block_width() const {
  const std::size_t weather = uses_wf(cfg_.variant) ? cfg_.year_features : cfg_.weather_cnn_features;
  return weather + cfg_.soil_features + cfg_.practice_count + 1;
}

template <typename T>
ad::Var<T> YieldNet<T>::year_block(ad::Tape<T>& tape, const YieldSample& sample, std::size_t k, ad::Var<T> soil,
                                   nn::Rng* dropout_rng) const {
  const auto& yb = sample.years.at(k);
  ad::Var<T> weather;
  if (wf_) {
    model::SpatioTemporalContext ctx;
    ctx.latitude = sample.latitude;
    ctx.longitude = sample.longitude;
    ctx.year = yb.year;
    ctx.start_day_index = data::day_index(data::make_date(yb.year, 1, 1));
    ctx.granularity_days = 7;
    auto out = wf_->forward(tape, expand_weather<T>(yb.weather), ctx, yield_feature_mask(),
                            model::PaddingMask(kWeeks), dropout_rng);
    weather = wf_reduce_(ad::mean_rows(out));
  } else {
    weather = weather_cnn_(tape.constant(yb.weather.template cast<T>()));
  }
  std::vector<ad::Var<T>> parts{weather, soil};
  if (cfg_.practice_count > 0) parts.push_back(tape.constant(sample.practices.template cast<T>()));
  parts.push_back(tape.constant(ad::Tensor<T>::scalar(static_cast<T>(yb.yield_input))));
  return ad::concat_cols(parts);
}

template <typename T>
ad::Var<T> YieldNet<T>::forward(ad::Tape<T>& tape, const YieldSample& sample, nn::Rng* dropout_rng) const {
  if (sample.years.size() < cfg_.history) {
    throw std::invalid_argument("sample has " + std::to_string(sample.years.size()) + " years, model needs " +
                                std::to_string(cfg_.history));
  }
  if (sample.practices.size() != cfg_.practice_count) throw ad::ShapeError("practice vector width mismatch");
  auto soil = soil_(tape.constant(sample.soil.template cast<T>()));
  const std::size_t first = sample.years.size() - cfg_.history;
  std::vector<ad::Var<T>> blocks;
  std::vector<int> years;
  for (std::size_t k = first; k < sample.years.size(); ++k) {
    blocks.push_back(year_block(tape, sample, k, soil, dropout_rng));
    years.push_back(sample.years[k].year);
  }
  switch (cfg_.variant) {
    case YieldVariant::kWfLinear:
      return out_(blocks.size() == 1 ? blocks.front() : ad::concat_cols(blocks));
    case YieldVariant::kCnnRnn: {
      auto state = lstm_.zero_state(tape);
      for (const auto& b : blocks) state = lstm_(b, state);
      return out_(state.h);
    }
    default: {
      auto h = seq_in_(blocks.size() == 1 ? blocks.front() : ad::concat_rows(blocks));
      h = ad::add(h, tape.constant(year_encoding(sample.latitude, sample.longitude, years, cfg_.seq_d_model)
                                       .template cast<T>()));
      const model::PaddingMask all(years.size());
      h = seq_(h, all.span(), dropout_rng);
      return out_(ad::slice_rows(h, years.size() - 1, years.size()));
    }
  }
}

std::vector<double> LinearYieldModel::features(const YieldSample& s) const {
  if (s.years.size() < history_) throw std::invalid_argument("sample shorter than the regression history");
  std::vector<double> f;
  for (std::size_t k = s.years.size() - history_; k < s.years.size(); ++k) {
    for (float v : s.years[k].weather.values()) f.push_back(v);
    f.push_back(s.years[k].yield_input);
  }
  for (float v : s.soil.values()) f.push_back(v);
  for (float v : s.practices.values()) f.push_back(v);
  f.push_back(1.0);
  return f;
}

void LinearYieldModel::fit(const std::vector<YieldSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("linear regression needs samples");
  std::vector<double> design, target;
  std::size_t cols = 0;
  for (const auto& s : samples) {
    const auto f = features(s);
    cols = f.size();
    design.insert(design.end(), f.begin(), f.end());
    target.push_back(s.target_standardized);
  }
  const auto sol = util::least_squares(design, samples.size(), cols, target);
  coef_ = sol.coefficients;
  used_ridge_ = sol.used_ridge;
}

double LinearYieldModel::predict(const YieldSample& s) const {
  if (coef_.empty()) throw std::logic_error("linear regression used before fit");
  const auto f = features(s);
  if (f.size() != coef_.size()) throw std::invalid_argument("feature width differs from the fitted model");
  double y = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) y += f[k] * coef_[k];
  return y;
}

template class SoilCnn<float>;
template class SoilCnn<double>;
template class WeatherCnn<float>;
template class WeatherCnn<double>;
template class YieldNet<float>;
template class YieldNet<double>;
template ad::Tensor<float> expand_weather(const ad::Tensor<float>&);
template ad::Tensor<double> expand_weather(const ad::Tensor<float>&);

}  // namespace wf::yield
