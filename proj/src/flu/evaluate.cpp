#include "weatherformer/flu/evaluate.hpp"

#include <fstream>

#include "weatherformer/util/parallel.hpp"

namespace wf::flu {

model::FitConfig default_flu_fit() {
  model::FitConfig c;
  c.epochs = 30;
  c.batch_size = 64;
  c.base_lr = 9e-4;
  c.warmup_epochs = 5;
  c.decay = 0.95;
  return c;
}

nlohmann::json FluRunConfig::to_json() const {
  return {{"model", model.to_json()}, {"fit", fit.to_json()}, {"loss", "mse"}};
}

namespace {

void finish(FluSplitResult& r, const IliSeries& series) {
  r.truth = task_truth(series, r.tasks);
  r.mae = mae_at_horizons(r.forecasts, r.truth, r.tasks.front().horizon);
}

}  // namespace

FluSplitResult train_flu_split(const IliSeries& series, const FluSplit& split, const FluRunConfig& cfg,
                               std::uint64_t seed, const ad::Checkpoint* pretrained) {
  cfg.model.validate();
  if (split.train.empty() || split.validation.empty()) throw std::invalid_argument("flu split has no tasks");
  const auto scaler = FluScaler::fit(series, split.train_weeks);
  nn::Rng rng(seed);
  ad::ParameterSet<float> params;
  FluForecaster<float> net(params, cfg.model, rng);
  if (pretrained != nullptr) {
    if (cfg.model.variant != FluVariant::kWf) throw std::invalid_argument("only the WF variant takes a pretrained encoder");
    if (pretrained->config.contains("model") &&
        model::ModelConfig::from_json(pretrained->config.at("model")).to_json() != cfg.model.weather.to_json()) {
      throw std::invalid_argument("pretrained checkpoint model config differs from the flu weather encoder");
    }
    if (ad::load_parameters(*pretrained, params, true) == 0) {
      throw std::invalid_argument("pretrained checkpoint has no weather encoder parameters");
    }
  }

  std::vector<double> losses(split.validation.size());
  auto fit_cfg = cfg.fit;
  fit_cfg.seed = seed;
  const auto fitted = model::fit<float>(
      params, split.train.size(),
      [&](ad::Tape<float>& tape, std::size_t i, std::mt19937_64& drop) {
        return net.loss(tape, series, scaler, split.train[i], &drop);
      },
      [&] {
        util::parallel_for(split.validation.size(), cfg.fit.threads, [&](std::size_t i) {
          ad::Tape<float> tape;
          losses[i] = net.loss(tape, series, scaler, split.validation[i]).value()[0];
        });
        double s = 0.0;
        for (double l : losses) s += l;
        return s / static_cast<double>(losses.size());
      },
      fit_cfg);

  FluSplitResult r;
  r.validation_year = split.validation_year;
  r.tasks = split.validation;
  r.history = fitted.history;
  r.best_epoch = fitted.best_epoch;
  r.validation_loss = fitted.best_validation;
  const std::size_t hz = cfg.model.horizon;
  r.forecasts.assign(r.tasks.size() * hz, 0.0);
  util::parallel_for(r.tasks.size(), cfg.fit.threads, [&](std::size_t i) {
    const auto f = net.forecast(series, scaler, r.tasks[i]);
    std::copy(f.begin(), f.end(), r.forecasts.begin() + static_cast<long>(i * hz));
  });
  finish(r, series);
  return r;
}

FluSplitResult arima_split(const IliSeries& series, const FluSplit& split, const ArimaConfig& cfg,
                           std::size_t horizon) {
  std::vector<double> ili;
  for (const auto& w : series.weeks) ili.push_back(w.ili_percent);
  const auto model = fit_arima(std::span<const double>(ili).first(split.train_weeks), cfg);
  FluSplitResult r;
  r.validation_year = split.validation_year;
  r.tasks = split.validation;
  for (const auto& t : r.tasks) {
    check_no_leak(t);
    const auto f = model.forecast(std::span<const double>(ili).first(t.origin + 1), horizon);
    r.forecasts.insert(r.forecasts.end(), f.begin(), f.end());
  }
  finish(r, series);
  return r;
}

FluSplitResult linreg_split(const IliSeries& series, const FluSplit& split, std::size_t lags) {
  LinregForecaster lr(lags);
  lr.fit(series, split.train);
  FluSplitResult r;
  r.validation_year = split.validation_year;
  r.tasks = split.validation;
  for (const auto& t : r.tasks) {
    const auto f = lr.forecast(series, t);
    r.forecasts.insert(r.forecasts.end(), f.begin(), f.end());
  }
  finish(r, series);
  return r;
}

FluEvaluation summarize(std::string method, std::vector<FluSplitResult> splits) {
  FluEvaluation e;
  e.method = std::move(method);
  std::vector<HorizonMae> per_year;
  for (const auto& s : splits) per_year.push_back(s.mae);
  e.mean = average(per_year);
  e.splits = std::move(splits);
  return e;
}

WindowSearch select_window(const IliSeries& series, const FluRunConfig& cfg, std::uint64_t seed,
                           const ad::Checkpoint* pretrained, std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw std::invalid_argument("no candidate windows");
  WindowSearch ws;
  double best = 0.0;
  for (std::size_t w : candidates) {
    auto c = cfg;
    c.model.window = w;
    std::vector<FluSplitResult> rs;
    for (const auto& split : sequential_splits(series, w, c.model.horizon)) {
      rs.push_back(train_flu_split(series, split, c, seed, pretrained));
    }
    const auto e = summarize("", std::move(rs));
    const double score = (e.mean.week1 + e.mean.week5 + e.mean.week10) / 3.0;
    ws.scores.emplace_back(w, score);
    if (ws.best_window == 0 || score < best) {
      best = score;
      ws.best_window = w;
    }
  }
  return ws;
}

void write_flu_csv(const std::filesystem::path& path, const IliSeries& series, const FluEvaluation& eval) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "method,validation_year,origin_epiweek,mae_1,mae_5,mae_10\n";
  for (const auto& s : eval.splits) {
    const std::size_t hz = s.tasks.empty() ? kHorizon : s.tasks.front().horizon;
    for (std::size_t i = 0; i < s.tasks.size(); ++i) {
      auto err = [&](std::size_t k) { return std::abs(s.forecasts[i * hz + k] - s.truth[i * hz + k]); };
      out << eval.method << ',' << s.validation_year << ',' << series.weeks[s.tasks[i].origin].week.code() << ','
          << err(0) << ',' << err(4) << ',' << err(9) << '\n';
    }
  }
  for (const auto& s : eval.splits) {
    out << eval.method << ',' << s.validation_year << ",pooled," << s.mae.week1 << ',' << s.mae.week5 << ','
        << s.mae.week10 << '\n';
  }
  out << eval.method << ",mean,pooled," << eval.mean.week1 << ',' << eval.mean.week5 << ',' << eval.mean.week10 << '\n';
}

}  // namespace wf::flu
