#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/autodiff/grad_check.hpp"
#include "weatherformer/flu/evaluate.hpp"

using namespace wf;
using namespace wf::flu;

namespace {

IliSeries flat_series(int first_year, int last_year, double value = 2.0) {
  IliSeries s;
  s.latitude = 40.0;
  s.longitude = -74.0;
  for (Epiweek w{first_year, 1}; w.year <= last_year; w = w.next()) s.weeks.push_back({w, value, 1000.0});
  return s;
}

const IliSeries& synthetic_city() {
  static const IliSeries s = generate_ili_synthetic(IliSynthSpec{}, 21);
  return s;
}

FluModelConfig tiny_config(FluVariant v, std::size_t window = 105) {
  FluModelConfig c;
  c.variant = v;
  c.window = window;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.ff_width = 32;
  c.weather = model::ModelConfig::preset("tiny");
  c.weather.d_model = 8;
  c.weather.n_heads = 2;
  c.weather.n_layers = 1;
  c.weather.ff_width = 16;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wf_flu_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("epiweeks") {
  CHECK(Epiweek{2016, 1}.start() == data::make_date(2016, 1, 3));
  CHECK(Epiweek{2019, 1}.start() == data::make_date(2018, 12, 30));
  CHECK(weeks_in_year(2014) == 53);
  CHECK(weeks_in_year(2020) == 53);
  for (int y = 2015; y <= 2019; ++y) CHECK(weeks_in_year(y) == 52);
  CHECK(epiweek_of(data::make_date(2015, 1, 1)) == Epiweek{2014, 53});
  CHECK(epiweek_of(data::make_date(2016, 1, 9)) == Epiweek{2016, 1});
  CHECK(epiweek_of(data::make_date(2016, 1, 10)) == Epiweek{2016, 2});
  CHECK(Epiweek{2014, 53}.next() == Epiweek{2015, 1});
  CHECK(Epiweek::from_code(201742).code() == 201742);
  CHECK_THROWS(Epiweek::from_code(201553));
  CHECK_THROWS(Epiweek::from_code(201600));
  // every day maps into the week whose start precedes it by less than 7 days
  for (auto d = data::day_index(data::make_date(2009, 12, 1)); d < data::day_index(data::make_date(2021, 2, 1)); ++d) {
    const auto w = epiweek_of(data::date_from_day_index(d));
    const auto off = d - data::day_index(w.start());
    REQUIRE(off >= 0);
    REQUIRE(off < 7);
  }
}

TEST_CASE("ili csv round trip and validation") {
  const auto dir = temp_dir("csv");
  auto s = flat_series(2015, 2016);
  s.weeks[3].ili_percent = 3.25;
  write_ili_csv(dir / "city.csv", s);
  const auto back = read_ili_csv(dir / "city.csv");
  REQUIRE(back.size() == s.size());
  CHECK(back.weeks[3].ili_percent == 3.25);
  CHECK(back.weeks.front().week == Epiweek{2015, 1});

  std::ofstream(dir / "bad_header.csv") << "week,ili,patients\n201501,1,2\n";
  CHECK_THROWS(read_ili_csv(dir / "bad_header.csv"));
  std::ofstream(dir / "gap.csv") << "epiweek,ili_percent,num_patients\n201501,1,2\n201503,1,2\n";
  CHECK_THROWS(read_ili_csv(dir / "gap.csv"));
  std::ofstream(dir / "range.csv") << "epiweek,ili_percent,num_patients\n201501,101,2\n";
  CHECK_THROWS(read_ili_csv(dir / "range.csv"));
  std::ofstream(dir / "text.csv") << "epiweek,ili_percent,num_patients\n201501,abc,2\n";
  CHECK_THROWS(read_ili_csv(dir / "text.csv"));

  auto misaligned = s;
  misaligned.weather.resize(3);
  CHECK_THROWS(misaligned.validate());
  CHECK(s.index_of({2016, 2}) == 53);
  CHECK(s.index_of({2014, 2}) == s.size());
  CHECK(s.truncated_before(2016).size() == 52);
}

TEST_CASE("weekly weather averages daily cells over epiweeks") {
  auto a = data::WeatherSeries::zeros(21);
  a.start_date = data::make_date(2016, 1, 3);
  a.valid_len = 21;
  auto b = a;
  for (std::size_t r = 0; r < 21; ++r) {
    a.at(r, data::kT2M) = static_cast<float>(r);
    b.at(r, data::kT2M) = 10.0f;
  }
  const auto w = weekly_weather({a, b}, {{2016, 1}, {2016, 3}});
  CHECK(w[0][data::kT2M] == doctest::Approx((3.0 + 10.0) / 2.0));
  CHECK(w[1][data::kT2M] == doctest::Approx((17.0 + 10.0) / 2.0));
  CHECK_THROWS(weekly_weather({a}, {{2016, 4}}));
  CHECK_THROWS(weekly_weather({}, {{2016, 1}}));
}

TEST_CASE("rolling tasks") {
  const std::size_t w = 105;
  auto one = rolling_tasks(w + 10, w, 10, 0, 1000);
  REQUIRE(one.size() == 1);
  CHECK(one[0].origin == w - 1);
  CHECK(one[0].target_end() == w + 10);
  CHECK_THROWS(rolling_tasks(w + 9, w, 10, 0, 1000));

  const auto& s = synthetic_city();
  const auto tasks = tasks_for_year(s, 2017, w);
  REQUIRE(tasks.size() == 52);
  CHECK(s.weeks[tasks.front().target_begin()].week == Epiweek{2017, 1});
  CHECK(s.weeks[tasks.back().target_begin()].week == Epiweek{2017, 52});
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].horizon == 10);
    CHECK(tasks[i].input_end() == tasks[i].target_begin());
    if (i > 0) {
      CHECK(tasks[i].origin == tasks[i - 1].origin + 1);
      // 9 of 10 target weeks shared with the previous task
      CHECK(tasks[i].target_begin() == tasks[i - 1].target_begin() + 1);
      CHECK(tasks[i - 1].target_end() - tasks[i].target_begin() == 9);
    }
  }
  CHECK_THROWS_AS(check_no_leak(ForecastTask{10, 12, 10}), std::logic_error);
  CHECK_THROWS_AS(check_no_leak(ForecastTask{10, 5, 0}), std::logic_error);
}

TEST_CASE("sequential splits") {
  const auto& s = synthetic_city();
  const auto splits = sequential_splits(s, 105);
  REQUIRE(splits.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& sp = splits[k];
    CHECK(sp.validation_year == 2016 + static_cast<int>(k));
    CHECK(sp.validation.size() == 52);
    const std::size_t first_val_week = s.index_of({sp.validation_year, 1});
    CHECK(sp.train_weeks == first_val_week);
    for (const auto& t : sp.train) CHECK(t.target_end() <= first_val_week);
    for (const auto& t : sp.validation) {
      CHECK(t.target_begin() >= first_val_week);
      check_no_leak(t);
    }
    if (k > 0) CHECK(sp.train.size() > splits[k - 1].train.size());
  }
  CHECK(s.weeks.back().week.year == 2020);

  auto longer = flat_series(2010, 2022);
  const auto sp2 = sequential_splits(longer, 105);
  for (const auto& sp : sp2) {
    for (const auto& t : sp.validation) CHECK(longer.weeks[t.target_end() - 1].week.year < kExcludedFromYear);
  }
  CHECK_THROWS(sequential_splits(flat_series(2011, 2020), 105));
  // 2019 validation needs the first ten weeks of 2020
  CHECK_THROWS(sequential_splits(flat_series(2010, 2019), 105));
}

TEST_CASE("mae at horizons") {
  std::vector<double> truth(3 * 10);
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = 0.1 * static_cast<double>(i);
  auto m = mae_at_horizons(truth, truth);
  CHECK(m.week1 == 0.0);
  CHECK(m.week5 == 0.0);
  CHECK(m.week10 == 0.0);
  auto shifted = truth;
  for (auto& v : shifted) v += 1.0;
  m = mae_at_horizons(shifted, truth);
  CHECK(m.week1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.week10 == doctest::Approx(1.0).epsilon(1e-12));

  // hand computed: week1 errors 0.5, 1.5, 0.25; week5 errors 2, 0, 1; week10 errors 0, 0, 3
  auto f = truth;
  f[0] += 0.5;
  f[10] -= 1.5;
  f[20] += 0.25;
  f[4] += 2.0;
  f[24] -= 1.0;
  f[29] += 3.0;
  m = mae_at_horizons(f, truth);
  CHECK(std::abs(m.week1 - 2.25 / 3.0) < 1e-12);
  CHECK(std::abs(m.week5 - 1.0) < 1e-12);
  CHECK(std::abs(m.week10 - 1.0) < 1e-12);

  CHECK_THROWS(mae_at_horizons(std::vector<double>(9), std::vector<double>(9), 9));
  CHECK_THROWS(mae_at_horizons(std::vector<double>(20), std::vector<double>(10)));
  const std::vector<HorizonMae> years = {{1, 2, 3}, {3, 4, 5}};
  CHECK(average(years).week5 == 3.0);
}

TEST_CASE("arima estimation") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z;

  SUBCASE("random walk forecasts the last value") {
    std::vector<double> x{10.0};
    for (int i = 0; i < 300; ++i) x.push_back(x.back() + z(rng));
    const auto f = arima_fit_forecast(x, ArimaConfig{0, 1, 0}, 10);
    for (double v : f) CHECK(std::abs(v - x.back()) < 1e-6);
  }

  SUBCASE("AR(1) on the differences is recovered") {
    std::vector<double> x{0.0};
    double dprev = 0.0;
    for (int i = 0; i < 500; ++i) {
      dprev = 0.7 * dprev + z(rng);
      x.push_back(x.back() + dprev);
    }
    const auto m = fit_arima(x, ArimaConfig{1, 1, 0});
    CHECK(std::abs(m.ar[0] - 0.7) < 0.1);
    CHECK(m.constant == 0.0);
  }

  SUBCASE("one-step error close to the generating model") {
    const double phi = 0.5, theta = 0.4;
    std::vector<double> x{0.0}, shocks{0.0};
    double dprev = 0.0;
    for (int i = 0; i < 1500; ++i) {
      const double e = z(rng);
      const double d = phi * dprev + e + theta * shocks.back();
      shocks.push_back(e);
      dprev = d;
      x.push_back(x.back() + d);
    }
    const std::size_t train = 1000;
    const auto m = fit_arima(std::span<const double>(x).first(train), ArimaConfig{1, 1, 1});
    CHECK(std::abs(m.ar[0] - phi) < 0.15);
    CHECK(std::abs(m.ma[0] - theta) < 0.15);
    // the generating model's one-step error is exactly the shock
    double fitted = 0.0, oracle = 0.0;
    for (std::size_t t = train; t < x.size(); ++t) {
      const auto f = m.forecast(std::span<const double>(x).first(t), 1);
      fitted += std::abs(f[0] - x[t]);
      oracle += std::abs(shocks[t]);
    }
    MESSAGE("fitted one-step MAE " << fitted / 500 << " oracle " << oracle / 500);
    CHECK(fitted <= 1.10 * oracle);
  }

  SUBCASE("errors") {
    std::vector<double> x(50, 1.0);
    CHECK_THROWS_AS(fit_arima(x, ArimaConfig{}), ArimaError);
    CHECK_THROWS(ArimaConfig{1, 3, 0}.validate());
    CHECK(ma_invertible(std::vector<double>{0.5}));
    CHECK_FALSE(ma_invertible(std::vector<double>{1.2}));
    CHECK_FALSE(ma_invertible(std::vector<double>{-2.5, 1.0}));
    CHECK(ma_invertible(std::vector<double>{0.5, 0.06}));
  }
}

TEST_CASE("arima with the default order on a city series") {
  const auto& s = synthetic_city();
  const auto splits = sequential_splits(s, 105);
  CHECK(ArimaConfig{}.p == 54);
  CHECK(ArimaConfig{}.d == 1);
  CHECK(ArimaConfig{}.q == 1);
  const auto r = arima_split(s, splits[0], ArimaConfig{});
  CHECK(r.tasks.size() == 52);
  for (double v : r.forecasts) CHECK(std::isfinite(v));
  MESSAGE("arima MAE +1/+5/+10: " << r.mae.week1 << " " << r.mae.week5 << " " << r.mae.week10);
  CHECK(r.mae.week1 < r.mae.week10);
}

TEST_CASE("per-horizon linear regression") {
  // hand solution of the one-lag regression at horizon 1
  IliSeries s = flat_series(2010, 2010);
  const std::vector<double> v = {1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 8.0, 7.0};
  s.weeks.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s.weeks[i].ili_percent = v[i];
  const auto tasks = rolling_tasks(v.size(), 1, 1, 0, 100);
  REQUIRE(tasks.size() == 7);
  LinregForecaster lr(1);
  lr.fit(s, tasks);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = 0; t < 7; ++t) {
    sx += v[t];
    sy += v[t + 1];
    sxx += v[t] * v[t];
    sxy += v[t] * v[t + 1];
  }
  const double slope = (7 * sxy - sx * sy) / (7 * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / 7;
  CHECK(std::abs(lr.coefficients(0)[0] - icpt) < 1e-9);
  CHECK(std::abs(lr.coefficients(0)[1] - slope) < 1e-9);

  // exactly linear series
  IliSeries lin = flat_series(2010, 2012);
  for (std::size_t i = 0; i < lin.size(); ++i) lin.weeks[i].ili_percent = 1.0 + 0.05 * static_cast<double>(i);
  const auto lt = rolling_tasks(lin.size(), 4, 10, 0, 1000);
  LinregForecaster l2(4);
  l2.fit(lin, lt);
  const auto truth = task_truth(lin, lt);
  std::vector<double> pred;
  for (const auto& t : lt) {
    const auto f = l2.forecast(lin, t);
    pred.insert(pred.end(), f.begin(), f.end());
  }
  const auto m = mae_at_horizons(pred, truth);
  CHECK(m.week10 < 1e-8);

  // constant series takes the ridge path and still forecasts the constant
  IliSeries flat = flat_series(2010, 2012, 3.5);
  const auto ft = rolling_tasks(flat.size(), 4, 10, 0, 1000);
  LinregForecaster l3(4);
  l3.fit(flat, ft);
  CHECK(l3.used_ridge());
  for (double f : l3.forecast(flat, ft.back())) CHECK(std::abs(f - 3.5) < 1e-6);
}

TEST_CASE("residual composition") {
  FluScaler sc;
  sc.ili_mean = 2.0;
  sc.ili_std = 0.5;
  const std::vector<double> zeros(10, 0.0);
  for (double f : compose_forecast(zeros, 3.7, sc, true)) CHECK(f == 3.7);
  const auto nc = compose_forecast(zeros, 3.7, sc, false);
  CHECK(nc[0] == 3.7);
  CHECK(nc[5] == 2.0);
  const std::vector<double> ones(10, 1.0);
  const auto cum = compose_forecast(ones, 3.7, sc, true);
  CHECK(cum[9] == doctest::Approx(3.7 + 5.0));

  const auto& s = synthetic_city();
  for (auto v : {FluVariant::kNoWeather, FluVariant::kWeather, FluVariant::kWf}) {
    nn::Rng rng(4);
    ad::ParameterSet<float> params;
    FluForecaster<float> net(params, tiny_config(v), rng);
    for (auto* p : {&net.head().weight(), &net.head().bias()}) p->value.fill(0.0f);
    const auto scaler = FluScaler::fit(s, 300);
    const ForecastTask task{200, 105, 10};
    const auto f = net.forecast(s, scaler, task);
    CHECK(f[0] == s.weeks[200].ili_percent);
    CHECK(f[9] == s.weeks[200].ili_percent);
  }
}

TEST_CASE("forecaster sees only the input window and the unmasked weather column") {
  const auto& s = synthetic_city();
  const auto scaler = FluScaler::fit(s, 300);
  const ForecastTask task{250, 105, 10};
  for (auto v : {FluVariant::kWeather, FluVariant::kWf}) {
    nn::Rng rng(6);
    ad::ParameterSet<float> params;
    FluForecaster<float> net(params, tiny_config(v), rng);
    const auto before = net.forecast(s, scaler, task);
    auto changed = s;
    for (std::size_t r = 0; r < changed.size(); ++r) {
      for (std::size_t m = 1; m < data::kMeasurementCount; ++m) changed.weather[r][m] += 50.0f;
    }
    for (std::size_t r = task.target_begin(); r < changed.size(); ++r) {
      changed.weeks[r].ili_percent = 99.0;
      changed.weather[r][data::kT2M] = -40.0f;
    }
    const auto after = net.forecast(changed, scaler, task);
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
    // the temperature inside the window does matter
    auto warm = s;
    for (std::size_t r = task.input_begin(); r < task.input_end(); ++r) warm.weather[r][data::kT2M] += 5.0f;
    CHECK(net.forecast(warm, scaler, task) != before);
  }
  nn::Rng rng(1);
  ad::ParameterSet<float> params;
  FluForecaster<float> net(params, tiny_config(FluVariant::kNoWeather), rng);
  CHECK_THROWS(net.forecast(s, scaler, ForecastTask{250, 100, 10}));
}

TEST_CASE("WF forecaster gradient matches finite differences") {
  const auto& s = synthetic_city();
  const auto scaler = FluScaler::fit(s, 300);
  auto cfg = tiny_config(FluVariant::kWf, 12);
  cfg.d_model = 8;
  cfg.ff_width = 16;
  cfg.activation = model::Activation::kGelu;
  cfg.weather.activation = model::Activation::kGelu;
  nn::Rng rng(9);
  ad::ParameterSet<double> params;
  FluForecaster<double> net(params, cfg, rng);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& v : net.weather_encoder()->scalers().value.values()) v = u(rng);
  const ForecastTask task{150, 12, 10};
  ad::GradCheckOptions opts;
  opts.samples = 80;
  opts.seed = 3;
  const auto report = ad::grad_check(
      params, [&](ad::Tape<double>& tape) { return net.loss(tape, s, scaler, task); }, opts);
  CHECK(report.coordinates >= 60);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("flu config snapshot") {
  const auto fit = default_flu_fit();
  CHECK(fit.base_lr == 9e-4);
  CHECK(fit.epochs == 30);
  CHECK(fit.warmup_epochs == 5);
  CHECK(fit.decay == 0.95);
  const FluRunConfig run;
  const auto j = run.to_json();
  CHECK(j.at("loss") == "mse");
  CHECK(j.at("fit").at("base_lr") == 9e-4);
  CHECK(j.at("model").at("n_layers") == 3);
  CHECK(j.at("model").at("d_model") == 64);
  CHECK(j.at("model").at("weather_columns") == std::vector<std::size_t>{data::kT2M});
  CHECK(FluModelConfig::from_json(j.at("model")).to_json() == j.at("model"));
  const std::vector<std::size_t> windows(kWindowChoices.begin(), kWindowChoices.end());
  CHECK(windows == std::vector<std::size_t>{105, 110, 115, 120, 125, 130, 135});
  CHECK(parse_flu_variant("wf-transformer") == FluVariant::kWf);
  CHECK_THROWS(parse_flu_variant("lstm"));
}

TEST_CASE("short flu training run") {
  const auto& s = synthetic_city();
  const auto splits = sequential_splits(s, 105);
  FluRunConfig run;
  run.model = tiny_config(FluVariant::kWf);
  run.fit.epochs = 3;
  run.fit.batch_size = 32;
  run.fit.warmup_epochs = 1;
  const auto a = train_flu_split(s, splits[0], run, 5);
  const auto b = train_flu_split(s, splits[0], run, 5);
  REQUIRE(a.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) CHECK(a.history[e].validation == b.history[e].validation);
  CHECK(a.validation_loss == a.history[static_cast<std::size_t>(a.best_epoch)].validation);
  CHECK(a.forecasts.size() == 520);
  CHECK(a.mae.week1 == b.mae.week1);

  // pretrained encoders are accepted only by the WF variant
  nn::Rng rng(2);
  ad::ParameterSet<float> wp;
  model::WeatherFormer<float> wfm(wp, run.model.weather, rng);
  const auto ck = ad::make_checkpoint(wp, {{"model", run.model.weather.to_json()}});
  const auto c = train_flu_split(s, splits[0], run, 5, &ck);
  CHECK(c.history.size() == 3);
  auto no_weather = run;
  no_weather.model.variant = FluVariant::kNoWeather;
  CHECK_THROWS(train_flu_split(s, splits[0], no_weather, 5, &ck));

  const auto lr = linreg_split(s, splits[0]);
  const auto eval = summarize("linreg", {lr});
  const auto dir = temp_dir("run");
  write_flu_csv(dir / "flu.csv", s, eval);
  std::ifstream in(dir / "flu.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 1 + 52 + 1 + 1);
}
