#include "weatherformer/cli/app.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/cli/config.hpp"
#include "weatherformer/cli/svg.hpp"
#include "weatherformer/data/meteo.hpp"
#include "weatherformer/data/power_client.hpp"
#include "weatherformer/data/processing.hpp"
#include "weatherformer/data/store.hpp"
#include "weatherformer/data/synthetic.hpp"
#include "weatherformer/flu/evaluate.hpp"
#include "weatherformer/pretrain/trainer.hpp"
#include "weatherformer/yield/evaluate.hpp"

namespace wf::cli {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 of the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct Context {
  ConfigDoc doc;
  fs::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  std::ostream& out;
  std::ostream& err;
};

struct OptSpec {
  std::string name;
  std::string help;
  bool flag = false;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<OptSpec> options;
  std::function<void(Context&)> body;
};

fs::path require_file(Context& c, const std::string& key) {
  const auto p = c.doc.get_string(key, "");
  if (p.empty()) throw ConfigError("--" + key + " is required");
  if (!fs::exists(p)) throw std::runtime_error("input file not found: " + p);
  return p;
}

void write_snapshot(Context& c) { c.doc.write(c.out_dir / "config.snapshot"); }

std::size_t as_size(std::int64_t v, const std::string& key) {
  if (v < 0) throw ConfigError("setting '" + key + "' must not be negative");
  return static_cast<std::size_t>(v);
}

// ---- weather data -------------------------------------------------------

std::vector<data::GridTile> weather_tiles(Context& c) {
  const bool synth = c.doc.get_bool("synth", false);
  const auto path = c.doc.get_string("data", "");
  if (synth == !path.empty()) throw ConfigError("give exactly one of --data <store> or --synth");
  if (!synth) {
    if (!fs::exists(path)) throw std::runtime_error("input file not found: " + path);
    return data::read_store(path);
  }
  data::SynthSpec spec;
  const auto kind = c.doc.get_string("synth-kind", "physical");
  if (kind == "physical") spec.kind = data::SynthKind::kPhysical;
  else if (kind == "linear-latent") spec.kind = data::SynthKind::kLinearLatent;
  else throw ConfigError("synth-kind must be physical or linear-latent");
  spec.tiles = as_size(c.doc.get_int("synth-tiles", 3), "synth-tiles");
  spec.points_per_tile = as_size(c.doc.get_int("synth-points", 8), "synth-points");
  spec.years = static_cast<int>(c.doc.get_int("synth-years", 1));
  spec.first_year = static_cast<int>(c.doc.get_int("synth-first-year", 2000));
  spec.noise_sigma = c.doc.get_double("synth-sigma", 0.1);
  return data::generate_synthetic(spec, derive_seed(c.seed, 1));
}

pretrain::PretrainDataset weather_dataset(Context& c) {
  auto tiles = weather_tiles(c);
  const double val_fraction = c.doc.get_double("val-fraction", 0.2);
  auto [train, val] = data::split_dataset(std::move(tiles), val_fraction, derive_seed(c.seed, 2));
  std::vector<data::GridTile> all = std::move(train);
  for (auto& t : val) all.push_back(std::move(t));
  pretrain::WindowOptions opts;
  opts.windows = pretrain::WindowOptions::parse_windows(c.doc.get_string("windows", "1:365"));
  opts.min_rows = as_size(c.doc.get_int("min-rows", 8), "min-rows");
  opts.max_windows_per_series = as_size(c.doc.get_int("max-windows", 0), "max-windows");
  return pretrain::build_dataset(all, opts);
}

pretrain::PretrainConfig pretrain_config(Context& c) {
  pretrain::PretrainConfig p;
  p.task = pretrain::parse_task(c.doc.get_string("task", "masked-feature"));
  p.mlm.rate = c.doc.get_double("mlm-rate", p.mlm.rate);
  p.epochs = static_cast<int>(c.doc.get_int("epochs", p.epochs));
  p.batch_size = as_size(c.doc.get_int("batch-size", static_cast<std::int64_t>(p.batch_size)), "batch-size");
  p.base_lr = c.doc.get_double("lr", p.base_lr);
  p.warmup_epochs = static_cast<int>(c.doc.get_int("warmup", p.warmup_epochs));
  p.decay = c.doc.get_double("decay", p.decay);
  p.rotate_targets = c.doc.get_bool("rotate-targets", p.rotate_targets);
  p.samples_per_epoch = as_size(c.doc.get_int("samples-per-epoch", 0), "samples-per-epoch");
  p.validation_samples = as_size(c.doc.get_int("validation-samples", 0), "validation-samples");
  p.seed = derive_seed(c.seed, 3);
  p.threads = c.threads;
  p.validate();
  return p;
}

void cmd_fetch(Context& c) {
  data::Bounds b;
  b.lat_min = c.doc.get_double("lat-min", 40.0);
  b.lat_max = c.doc.get_double("lat-max", 45.0);
  b.lon_min = c.doc.get_double("lon-min", -100.0);
  b.lon_max = c.doc.get_double("lon-max", -92.0);
  const int y0 = static_cast<int>(c.doc.get_int("first-year", 2019));
  const int y1 = static_cast<int>(c.doc.get_int("last-year", 2019));
  const auto points = as_size(c.doc.get_int("points", 0), "points");
  data::PowerClientConfig pc = data::apply_environment({});
  pc.offline = c.doc.get_bool("offline", false);
  write_snapshot(c);
  const data::PowerClient client(pc);
  auto tile = data::impute_missing(data::fetch_tile(client, b, y0, y1, points));
  const auto path = c.out_dir / "tiles.wfds";
  data::write_store({tile}, path.string());
  c.out << "fetched " << tile.coordinates.size() << " points x " << tile.year_count() << " years"
        << (pc.offline ? " (offline)" : "") << " -> " << path.string() << "\n";
}

void cmd_derive(Context& c) {
  const auto in = require_file(c, "input");
  write_snapshot(c);
  auto tiles = data::read_store(in.string());
  for (auto& t : tiles) {
    if (t.granularity_days != 1) throw std::runtime_error("derive expects daily tiles");
    for (auto& coord : t.series) {
      for (auto& s : coord) {
        if (s.standardized) throw std::runtime_error("derive expects natural units");
        for (std::size_t r = 0; r < s.valid_len; ++r) data::derive_row(s.row(r));
      }
    }
  }
  const auto path = c.out_dir / "derived.wfds";
  data::write_store(tiles, path.string());
  c.out << "derived ET0/VAP/VAD for " << tiles.size() << " tiles -> " << path.string() << "\n";
}

void cmd_aggregate(Context& c) {
  const auto in = require_file(c, "input");
  const int g = static_cast<int>(c.doc.get_int("granularity", 7));
  write_snapshot(c);
  auto tiles = data::read_store(in.string());
  std::vector<data::GridTile> out;
  for (const auto& t : tiles) out.push_back(data::aggregate(t, g));
  const auto path = c.out_dir / ("aggregated_" + std::to_string(g) + ".wfds");
  data::write_store(out, path.string());
  c.out << "aggregated " << out.size() << " tiles to " << g << "-day steps -> " << path.string() << "\n";
}

yield::YieldTable yield_table(Context& c) {
  if (c.doc.get_bool("synth", false)) {
    yield::YieldSynthSpec s;
    s.counties_per_state = as_size(c.doc.get_int("yield-counties", 6), "yield-counties");
    s.first_year = static_cast<int>(c.doc.get_int("yield-first-year", 2000));
    s.years = static_cast<int>(c.doc.get_int("yield-years", 12));
    s.noise_sigma = c.doc.get_double("yield-noise", 2.0);
    s.weather_noise = c.doc.get_double("yield-weather-noise", 0.3);
    s.autoregression = c.doc.get_double("yield-ar", 0.5);
    s.weather_effect = c.doc.get_double("yield-effect", 6.0);
    const auto driver = c.doc.get_string("yield-driver", "annual-precipitation");
    if (driver == "annual-precipitation") s.driver = yield::YieldDriver::kAnnualPrecipitation;
    else if (driver == "july-precipitation") s.driver = yield::YieldDriver::kJulyPrecipitation;
    else if (driver == "season-et0") s.driver = yield::YieldDriver::kSeasonEt0;
    else throw ConfigError("yield-driver must be annual-precipitation, july-precipitation or season-et0");
    s.practice_count = as_size(c.doc.get_int("yield-practices", 3), "yield-practices");
    return yield::generate_yield_synthetic(s, derive_seed(c.seed, 4));
  }
  return yield::read_yield_csv(require_file(c, "data"));
}

flu::IliSeries ili_series(Context& c) {
  const double lat = c.doc.get_double("lat", 40.75);
  const double lon = c.doc.get_double("lon", -74.0);
  if (c.doc.get_bool("synth", false)) {
    flu::IliSynthSpec s;
    s.first_year = static_cast<int>(c.doc.get_int("flu-first-year", 2010));
    s.last_year = static_cast<int>(c.doc.get_int("flu-last-year", 2020));
    s.latitude = lat;
    s.longitude = lon;
    s.weather_effect = c.doc.get_double("flu-weather-effect", 0.6);
    s.noise_sigma = c.doc.get_double("flu-noise", 0.08);
    return flu::generate_ili_synthetic(s, derive_seed(c.seed, 5));
  }
  auto series = flu::read_ili_csv(require_file(c, "data"));
  series.latitude = lat;
  series.longitude = lon;
  const auto weather = c.doc.get_string("weather", "");
  if (!weather.empty()) {
    if (!fs::exists(weather)) throw std::runtime_error("input file not found: " + weather);
    // daily cells within half a degree of the city
    std::vector<data::WeatherSeries> cells;
    for (const auto& t : data::read_store(weather)) {
      for (std::size_t k = 0; k < t.coordinates.size(); ++k) {
        if (std::abs(t.coordinates[k].latitude - lat) <= 0.5 && std::abs(t.coordinates[k].longitude - lon) <= 0.5) {
          cells.push_back(data::concatenate(t.series[k]));
        }
      }
    }
    if (cells.empty()) throw std::runtime_error("weather store has no grid cells near the city");
    std::vector<flu::Epiweek> weeks;
    for (const auto& w : series.weeks) weeks.push_back(w.week);
    series.weather = flu::weekly_weather(cells, weeks);
  }
  series.validate();
  return series;
}

void cmd_synth(Context& c) {
  const auto dataset = c.doc.get_string("dataset", "weather");
  if (dataset == "weather") {
    c.doc.set("synth", true);
    auto tiles = weather_tiles(c);
    write_snapshot(c);
    const auto path = c.out_dir / "synthetic.wfds";
    data::write_store(tiles, path.string());
    c.out << "wrote " << tiles.size() << " synthetic tiles -> " << path.string() << "\n";
  } else if (dataset == "yield") {
    c.doc.set("synth", true);
    const auto table = yield_table(c);
    write_snapshot(c);
    const auto path = c.out_dir / "yield.csv";
    yield::write_yield_csv(path, table);
    c.out << "wrote " << table.records.size() << " county-years -> " << path.string() << "\n";
  } else if (dataset == "ili") {
    c.doc.set("synth", true);
    const auto s = ili_series(c);
    write_snapshot(c);
    const auto path = c.out_dir / "ili.csv";
    flu::write_ili_csv(path, s);
    c.out << "wrote " << s.size() << " weeks -> " << path.string() << "\n";
  } else {
    throw ConfigError("dataset must be weather, yield or ili");
  }
}

model::ModelConfig model_config(Context& c) {
  auto m = model::ModelConfig::preset(c.doc.get_string("model", "2m"));
  m.dropout = c.doc.get_double("dropout", m.dropout);
  m.validate();
  return m;
}

void cmd_pretrain(Context& c) {
  const auto mcfg = model_config(c);
  const auto pcfg = pretrain_config(c);
  const auto dataset = weather_dataset(c);
  write_snapshot(c);
  nn::Rng rng(derive_seed(c.seed, 6));
  ad::ParameterSet<float> params;
  model::WeatherFormer<float> net(params, mcfg, rng);
  c.out << "pretraining " << pretrain::to_string(pcfg.task) << " on " << dataset.train.size() << " train / "
        << dataset.validation.size() << " validation windows, " << params.element_count() << " parameters\n";
  const auto result = pretrain::run_pretraining(net, params, dataset, pcfg, c.out_dir, [&](const pretrain::EpochRecord& r) {
    c.out << "epoch " << r.epoch << " lr " << r.lr << " train " << r.train_loss << " validation " << r.validation_loss
          << "\n";
  });
  c.out << "best epoch " << result.best_epoch << " validation " << result.best_validation_loss << "\n";
}

void cmd_evaluate(Context& c) {
  const auto ck_path = require_file(c, "checkpoint");
  const auto ck = ad::load_checkpoint(ck_path);
  if (!ck.config.contains("model")) throw std::runtime_error("checkpoint has no model config");
  const auto mcfg = model::ModelConfig::from_json(ck.config.at("model"));
  auto pcfg = pretrain_config(c);
  const auto dataset = weather_dataset(c);
  write_snapshot(c);
  nn::Rng rng(0);
  ad::ParameterSet<float> params;
  model::WeatherFormer<float> net(params, mcfg, rng);
  ad::load_parameters(ck, params, false);
  const double loss = pretrain::evaluate_pretraining(net, dataset.validation, pcfg);
  std::ofstream csv(c.out_dir / "eval.csv");
  csv.precision(17);
  csv << "task,windows,validation_loss\n" << pretrain::to_string(pcfg.task) << ',' << dataset.validation.size() << ','
      << loss << '\n';
  c.out << "validation " << pretrain::to_string(pcfg.task) << " loss " << loss << "\n";
}

std::unique_ptr<ad::Checkpoint> pretrained_checkpoint(Context& c) {
  const auto path = c.doc.get_string("pretrained", "");
  if (path.empty()) return nullptr;
  if (!fs::exists(path)) throw std::runtime_error("input file not found: " + path);
  return std::make_unique<ad::Checkpoint>(ad::load_checkpoint(path));
}

model::FitConfig fit_config(Context& c, model::FitConfig f) {
  f.epochs = static_cast<int>(c.doc.get_int("epochs", f.epochs));
  f.batch_size = as_size(c.doc.get_int("batch-size", static_cast<std::int64_t>(f.batch_size)), "batch-size");
  f.base_lr = c.doc.get_double("lr", f.base_lr);
  f.warmup_epochs = static_cast<int>(c.doc.get_int("warmup", f.warmup_epochs));
  f.decay = c.doc.get_double("decay", f.decay);
  f.threads = c.threads;
  f.validate();
  return f;
}

void write_fit_history(const fs::path& path, const std::string& group,
                       const std::vector<std::pair<std::string, std::vector<model::FitEpoch>>>& runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << group << ",epoch,lr,train_loss,validation\n";
  for (const auto& [name, h] : runs) {
    for (const auto& e : h) out << name << ',' << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.validation << '\n';
  }
}

void cmd_finetune_yield(Context& c) {
  const auto table = yield_table(c);
  const auto variant = yield::parse_yield_variant(c.doc.get_string("variant", "wf-transformer"));
  auto ck = pretrained_checkpoint(c);
  yield::YieldRunConfig run;
  run.model = yield::YieldModelConfig::for_variant(variant);
  const auto history = c.doc.get_int("history", 0);
  if (history > 0) run.model.history = static_cast<std::size_t>(history);
  if (ck && ck->config.contains("model")) run.model.weather = model::ModelConfig::from_json(ck->config.at("model"));
  else run.model.weather = model_config(c);
  run.model.seq_d_model = as_size(c.doc.get_int("seq-d-model", static_cast<std::int64_t>(run.model.seq_d_model)), "seq-d-model");
  run.model.seq_heads = as_size(c.doc.get_int("seq-heads", static_cast<std::int64_t>(run.model.seq_heads)), "seq-heads");
  run.model.seq_layers = as_size(c.doc.get_int("seq-layers", static_cast<std::int64_t>(run.model.seq_layers)), "seq-layers");
  run.model.seq_ff = as_size(c.doc.get_int("seq-ff", static_cast<std::int64_t>(run.model.seq_ff)), "seq-ff");
  run.model.year_features = as_size(c.doc.get_int("year-features", static_cast<std::int64_t>(run.model.year_features)), "year-features");
  run.model.soil_features = as_size(c.doc.get_int("soil-features", static_cast<std::int64_t>(run.model.soil_features)), "soil-features");
  run.fit = fit_config(c, yield::default_yield_fit());
  const auto folds = as_size(c.doc.get_int("folds", 5), "folds");
  const auto fold_index = c.doc.get_int("fold", -1);
  write_snapshot(c);

  const auto plan = yield::SplitPlan::make(table.states(), derive_seed(c.seed, 7) % 1000003, folds);
  yield::CrossValidation cv;
  std::vector<std::pair<std::string, std::vector<model::FitEpoch>>> hist;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    if (fold_index >= 0 && static_cast<std::size_t>(fold_index) != f) continue;
    auto r = yield::train_fold(table, plan.folds[f], run, derive_seed(c.seed, 100 + f), ck.get());
    r.fold = f;
    c.out << "fold " << f << " rmse " << r.rmse << " (best epoch " << r.best_epoch << ")\n";
    hist.emplace_back(std::to_string(f), r.history);
    cv.mean_rmse += r.rmse;
    cv.folds.push_back(std::move(r));
  }
  if (cv.folds.empty()) throw ConfigError("fold index out of range");
  cv.mean_rmse /= static_cast<double>(cv.folds.size());
  yield::write_fold_csv(c.out_dir / "folds.csv", cv);
  if (variant != yield::YieldVariant::kLinearRegression) write_fit_history(c.out_dir / "loss.csv", "fold", hist);
  c.out << "mean rmse " << cv.mean_rmse << " Bu/Acre over " << cv.folds.size() << " folds\n";
}

std::vector<std::size_t> weather_columns(const std::string& text) {
  std::vector<std::size_t> cols;
  std::stringstream ss(text);
  std::string sym;
  while (std::getline(ss, sym, ',')) {
    const auto idx = data::index_of(sym);
    if (!idx) throw ConfigError("unknown measurement symbol '" + sym + "'");
    cols.push_back(*idx);
  }
  return cols;
}

void cmd_finetune_flu(Context& c) {
  const auto series = ili_series(c);
  const auto method = c.doc.get_string("variant", "wf-transformer");
  const auto split_index = c.doc.get_int("split", -1);
  auto window = as_size(c.doc.get_int("window", 105), "window");
  auto pick = [&](const std::vector<flu::FluSplit>& all) {
    std::vector<flu::FluSplit> chosen;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (split_index < 0 || static_cast<std::size_t>(split_index) == k) chosen.push_back(all[k]);
    }
    if (chosen.empty()) throw ConfigError("split index out of range (0..3)");
    return chosen;
  };

  std::vector<flu::FluSplitResult> results;
  if (method == "arima") {
    flu::ArimaConfig a;
    a.p = as_size(c.doc.get_int("arima-p", 54), "arima-p");
    a.d = as_size(c.doc.get_int("arima-d", 1), "arima-d");
    a.q = as_size(c.doc.get_int("arima-q", 1), "arima-q");
    a.validate();
    write_snapshot(c);
    for (const auto& s : pick(flu::sequential_splits(series, window))) results.push_back(flu::arima_split(series, s, a));
  } else if (method == "linreg") {
    const auto lags = as_size(c.doc.get_int("lags", 4), "lags");
    write_snapshot(c);
    for (const auto& s : pick(flu::sequential_splits(series, window))) results.push_back(flu::linreg_split(series, s, lags));
  } else {
    flu::FluRunConfig run;
    run.model.variant = flu::parse_flu_variant(method);
    run.model.d_model = as_size(c.doc.get_int("d-model", 64), "d-model");
    run.model.n_heads = as_size(c.doc.get_int("heads", 4), "heads");
    run.model.n_layers = as_size(c.doc.get_int("layers", 3), "layers");
    run.model.ff_width = as_size(c.doc.get_int("ff", 128), "ff");
    run.model.cumulative = c.doc.get_bool("cumulative", true);
    run.model.weather_columns = weather_columns(c.doc.get_string("weather-columns", "T2M"));
    auto ck = pretrained_checkpoint(c);
    if (ck && ck->config.contains("model")) run.model.weather = model::ModelConfig::from_json(ck->config.at("model"));
    else run.model.weather = model_config(c);
    run.fit = fit_config(c, flu::default_flu_fit());
    if (run.model.variant != flu::FluVariant::kNoWeather && series.weather.empty()) {
      throw ConfigError("weather variants need --weather <store> (or --synth)");
    }
    if (window == 0) {
      write_snapshot(c);
      const auto ws = flu::select_window(series, run, derive_seed(c.seed, 8), ck.get());
      for (const auto& [w, score] : ws.scores) c.out << "window " << w << " mean MAE " << score << "\n";
      window = ws.best_window;
      c.doc.set("window", static_cast<std::int64_t>(window));
      c.out << "selected window " << window << "\n";
    }
    run.model.window = window;
    run.model.validate();
    write_snapshot(c);
    std::vector<std::pair<std::string, std::vector<model::FitEpoch>>> hist;
    for (const auto& s : pick(flu::sequential_splits(series, window, run.model.horizon))) {
      results.push_back(flu::train_flu_split(series, s, run, derive_seed(c.seed, 200 + static_cast<std::uint64_t>(s.validation_year)), ck.get()));
      hist.emplace_back(std::to_string(s.validation_year), results.back().history);
    }
    write_fit_history(c.out_dir / "loss.csv", "validation_year", hist);
  }
  for (const auto& r : results) {
    c.out << r.validation_year << " MAE +1 " << r.mae.week1 << " +5 " << r.mae.week5 << " +10 " << r.mae.week10 << "\n";
  }
  const auto eval = flu::summarize(method, std::move(results));
  flu::write_flu_csv(c.out_dir / "flu.csv", series, eval);
  c.out << "mean MAE +1 " << eval.mean.week1 << " +5 " << eval.mean.week5 << " +10 " << eval.mean.week10 << "\n";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

void cmd_export(Context& c) {
  const auto run = c.doc.get_string("run", "");
  if (run.empty()) throw ConfigError("--run is required");
  const fs::path loss = fs::path(run) / "loss.csv";
  if (!fs::exists(loss)) throw std::runtime_error("no loss.csv in " + run);
  std::ifstream in(loss);
  std::string line;
  std::getline(in, line);
  const auto header = split_line(line);
  const auto col = [&](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return static_cast<std::ptrdiff_t>(k);
    }
    return -1;
  };
  const auto epoch_col = col("epoch");
  const auto train_col = col("train_loss");
  auto val_col = col("validation_loss");
  if (val_col < 0) val_col = col("validation");
  if (epoch_col < 0 || train_col < 0 || val_col < 0) throw std::runtime_error("loss.csv lacks epoch/train/validation columns");
  const bool grouped = epoch_col > 0;

  struct Curve {
    std::vector<double> epoch, train, val;
  };
  std::map<std::string, Curve> curves;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw std::runtime_error("malformed row in loss.csv: " + line);
    const std::string g = grouped ? cells[0] : "run";
    if (!curves.contains(g)) order.push_back(g);
    auto& cv = curves[g];
    cv.epoch.push_back(std::stod(cells[static_cast<std::size_t>(epoch_col)]));
    cv.train.push_back(std::stod(cells[static_cast<std::size_t>(train_col)]));
    cv.val.push_back(std::stod(cells[static_cast<std::size_t>(val_col)]));
  }
  if (order.empty()) throw std::runtime_error("loss.csv has no rows");
  write_snapshot(c);

  std::ofstream metrics(c.out_dir / "metrics.csv");
  metrics.precision(17);
  metrics << "group,epochs,best_epoch,best_validation,final_train,final_validation\n";
  std::vector<PlotSeries> plots;
  for (const auto& g : order) {
    const auto& cv = curves[g];
    const auto best = static_cast<std::size_t>(std::min_element(cv.val.begin(), cv.val.end()) - cv.val.begin());
    metrics << g << ',' << cv.epoch.size() << ',' << cv.epoch[best] << ',' << cv.val[best] << ',' << cv.train.back()
            << ',' << cv.val.back() << '\n';
    const std::string prefix = grouped ? g + " " : "";
    plots.push_back({prefix + "train", cv.epoch, cv.train});
    plots.push_back({prefix + "validation", cv.epoch, cv.val});
  }
  std::ofstream svg(c.out_dir / "loss.svg");
  svg << line_chart_svg("Loss curves: " + fs::path(run).filename().string(), "epoch", "loss", plots);
  c.out << "wrote " << (c.out_dir / "metrics.csv").string() << " and " << (c.out_dir / "loss.svg").string() << "\n";
}

std::vector<OptSpec> common_options() {
  return {{"config", "Key = value config file; flags override its values"},
          {"seed", "Seed of every random stream in the run"},
          {"out", "Output directory"},
          {"threads", "Worker threads (1 = deterministic mode)"},
          {"deterministic", "Force single-threaded execution", true},
          {"offline", "Never touch the network", true}};
}

std::vector<OptSpec> weather_data_options() {
  return {{"data", "Binary tile store"},
          {"synth", "Use generated synthetic tiles", true},
          {"synth-kind", "physical | linear-latent"},
          {"synth-tiles", "Synthetic tiles"},
          {"synth-points", "Grid points per synthetic tile (0 = all 160)"},
          {"synth-years", "Synthetic years"},
          {"synth-first-year", "First synthetic year"},
          {"synth-sigma", "Synthetic noise level"},
          {"val-fraction", "Fraction of tiles held out for validation"},
          {"windows", "granularity:rows list, e.g. 1:365,7:52"},
          {"min-rows", "Drop trailing windows with fewer real rows"},
          {"max-windows", "Cap on windows per series and granularity"}};
}

std::vector<OptSpec> training_options() {
  return {{"epochs", "Training epochs"},  {"batch-size", "Batch size"},   {"lr", "Base learning rate"},
          {"warmup", "Warm-up epochs"},   {"decay", "Per-epoch decay"}, {"model", "Weather encoder preset: 2m, 8m or tiny"},
          {"dropout", "Dropout rate"}};
}

std::vector<Command> commands() {
  std::vector<Command> cmds;
  cmds.push_back({"fetch",
                  "Download a grid tile of daily weather (or synthesize it with --offline)",
                  {{"lat-min", "Southern edge"},
                   {"lat-max", "Northern edge"},
                   {"lon-min", "Western edge"},
                   {"lon-max", "Eastern edge"},
                   {"first-year", "First year"},
                   {"last-year", "Last year"},
                   {"points", "Grid points to fetch (0 = all)"}},
                  cmd_fetch});
  cmds.push_back({"derive", "Recompute ET0, VAP and VAD in a daily store", {{"input", "Daily tile store"}}, cmd_derive});
  cmds.push_back({"aggregate",
                  "Aggregate a daily store to a coarser granularity",
                  {{"input", "Daily tile store"}, {"granularity", "Days per step (7 or 30)"}},
                  cmd_aggregate});
  auto synth_opts = weather_data_options();
  for (OptSpec o : std::vector<OptSpec>{{"dataset", "weather | yield | ili"},
                                        {"yield-counties", "Counties per state"},
                                        {"yield-first-year", "First yield year"},
                                        {"yield-years", "Yield years"},
                                        {"yield-noise", "Yield noise (Bu/Acre)"},
                                        {"yield-weather-noise", "Weather noise of the yield counties"},
                                        {"yield-ar", "Weight of last year's yield deviation"},
                                        {"yield-effect", "Yield response to the weather driver"},
                                        {"yield-driver", "annual-precipitation | july-precipitation | season-et0"},
                                        {"yield-practices", "Management practice columns"},
                                        {"flu-first-year", "First ILI year"},
                                        {"flu-last-year", "Last ILI year"},
                                        {"flu-weather-effect", "Temperature effect on incidence"},
                                        {"flu-noise", "Incidence noise"},
                                        {"lat", "City latitude"},
                                        {"lon", "City longitude"}}) {
    synth_opts.push_back(o);
  }
  cmds.push_back({"synth", "Write a synthetic weather store, yield table or ILI series", synth_opts, cmd_synth});

  auto pre = weather_data_options();
  for (const auto& o : training_options()) pre.push_back(o);
  for (OptSpec o : std::vector<OptSpec>{{"task", "masked-feature | mlm"},
                                        {"mlm-rate", "Masked timestep fraction for mlm"},
                                        {"rotate-targets", "Swap one target and one input per batch (true/false)"},
                                        {"samples-per-epoch", "Training windows per epoch (0 = all)"},
                                        {"validation-samples", "Validation windows per epoch (0 = all)"}}) {
    pre.push_back(o);
  }
  cmds.push_back({"pretrain", "Pretrain the weather encoder", pre, cmd_pretrain});

  auto eval = weather_data_options();
  for (OptSpec o : std::vector<OptSpec>{{"checkpoint", "Pretrained checkpoint"},
                                        {"task", "masked-feature | mlm"},
                                        {"mlm-rate", "Masked timestep fraction for mlm"},
                                        {"validation-samples", "Validation windows (0 = all)"}}) {
    eval.push_back(o);
  }
  cmds.push_back({"evaluate", "Score a pretrained checkpoint on validation windows", eval, cmd_evaluate});

  auto fy = training_options();
  for (OptSpec o : std::vector<OptSpec>{{"data", "Yield CSV"},
                                        {"synth", "Use a generated synthetic yield table", true},
                                        {"variant", "linear-regression | cnn-rnn | cnn-transformer | wf-linear | wf-transformer"},
                                        {"history", "Years of history (0 = variant default)"},
                                        {"pretrained", "Pretrained weather encoder checkpoint"},
                                        {"folds", "Cross-validation folds"},
                                        {"fold", "Run a single fold (-1 = all)"},
                                        {"seq-d-model", "Width of the per-year sequence encoder"},
                                        {"seq-heads", "Heads of the per-year sequence encoder"},
                                        {"seq-layers", "Layers of the per-year sequence encoder"},
                                        {"seq-ff", "Feed-forward width of the per-year sequence encoder"},
                                        {"year-features", "Width of the per-year weather features"},
                                        {"soil-features", "Width of the soil features"},
                                        {"yield-counties", "Counties per state"},
                                        {"yield-first-year", "First yield year"},
                                        {"yield-years", "Yield years"},
                                        {"yield-noise", "Yield noise (Bu/Acre)"},
                                        {"yield-weather-noise", "Weather noise of the yield counties"},
                                        {"yield-ar", "Weight of last year's yield deviation"},
                                        {"yield-effect", "Yield response to the weather driver"},
                                        {"yield-driver", "annual-precipitation | july-precipitation | season-et0"},
                                        {"yield-practices", "Management practice columns"}}) {
    fy.push_back(o);
  }
  cmds.push_back({"finetune-yield", "Cross-validated county yield prediction", fy, cmd_finetune_yield});

  auto ff = training_options();
  for (OptSpec o : std::vector<OptSpec>{{"data", "ILI CSV (epiweek,ili_percent,num_patients)"},
                                        {"weather", "Daily tile store covering the city"},
                                        {"synth", "Use a generated synthetic city", true},
                                        {"variant", "transformer | transformer-weather | wf-transformer | arima | linreg"},
                                        {"window", "Input weeks (0 = search 105..135)"},
                                        {"split", "Run a single split 0..3 (-1 = all)"},
                                        {"pretrained", "Pretrained weather encoder checkpoint"},
                                        {"d-model", "Forecaster width"},
                                        {"heads", "Forecaster heads"},
                                        {"layers", "Forecaster layers"},
                                        {"ff", "Forecaster feed-forward width"},
                                        {"cumulative", "Cumulative residual outputs (true/false)"},
                                        {"weather-columns", "Comma list of measurement symbols"},
                                        {"arima-p", "AR order"},
                                        {"arima-d", "Differencing order"},
                                        {"arima-q", "MA order"},
                                        {"lags", "Lags of the linear regression"},
                                        {"lat", "City latitude"},
                                        {"lon", "City longitude"},
                                        {"flu-first-year", "First ILI year"},
                                        {"flu-last-year", "Last ILI year"},
                                        {"flu-weather-effect", "Temperature effect on incidence"},
                                        {"flu-noise", "Incidence noise"}}) {
    ff.push_back(o);
  }
  cmds.push_back({"finetune-flu", "Rolling weekly ILI forecasting", ff, cmd_finetune_flu});
  cmds.push_back({"export", "Metrics CSV and SVG loss plot of a run", {{"run", "Run directory with loss.csv"}}, cmd_export});
  return cmds;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weather encoder pretraining and downstream forecasting"};
  app.name("weatherformer");
  app.require_subcommand(1, 1);
  auto cmds = commands();
  // option storage: subcommand -> option -> raw text / flag
  std::map<std::string, std::map<std::string, std::string>> text;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, std::map<std::string, CLI::Option*>> handles;
  std::map<std::string, CLI::App*> subs;
  for (auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    subs[cmd.name] = sub;
    auto opts = common_options();
    opts.insert(opts.end(), cmd.options.begin(), cmd.options.end());
    for (const auto& o : opts) {
      if (o.flag) handles[cmd.name][o.name] = sub->add_flag("--" + o.name, flags[cmd.name][o.name], o.help);
      else handles[cmd.name][o.name] = sub->add_option("--" + o.name, text[cmd.name][o.name], o.help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  const Command* chosen = nullptr;
  for (const auto& cmd : cmds) {
    if (subs[cmd.name]->parsed()) chosen = &cmd;
  }
  if (chosen == nullptr) {
    err << "error: no subcommand\n" << app.help();
    return kExitUsage;
  }
  if (subs[chosen->name]->get_help_ptr()->count() > 0) {
    out << subs[chosen->name]->help();
    return kExitOk;
  }

  try {
    ConfigDoc doc;
    const auto& t = text[chosen->name];
    if (handles[chosen->name]["config"]->count() > 0) doc = ConfigDoc::parse_file(t.at("config"));
    for (const auto& [name, opt] : handles[chosen->name]) {
      if (name == "config" || opt->count() == 0) continue;
      if (flags[chosen->name].contains(name)) doc.set(name, true);
      else doc.set(name, parse_value(t.at(name)));
    }
    if (doc.get_bool("deterministic", false)) doc.set("threads", std::int64_t{1});
    doc.get_bool("offline", false);
    Context ctx{std::move(doc), {}, 0, 1, out, err};
    ctx.seed = static_cast<std::uint64_t>(ctx.doc.get_int("seed", 0));
    ctx.threads = static_cast<int>(ctx.doc.get_int("threads", 1));
    if (ctx.threads < 1) throw ConfigError("threads must be at least 1");
    const auto default_out = chosen->name == "export" ? (fs::path(ctx.doc.get_string("run", "runs")) / "export").string() : "runs/" + chosen->name;
    ctx.out_dir = ctx.doc.get_string("out", default_out);
    fs::create_directories(ctx.out_dir);
    chosen->body(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace wf::cli
