#include "weatherformer/yield/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "weatherformer/data/series.hpp"
#include "weatherformer/data/synthetic.hpp"

namespace wf::yield {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw std::runtime_error("yield csv line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
}

std::vector<std::string> header_for(std::size_t practices) {
  std::vector<std::string> h = {"county", "state", "year", "latitude", "longitude"};
  for (std::size_t w = 0; w < kWeeks; ++w) {
    for (const char* v : kWeatherNames) h.push_back("w" + std::to_string(w + 1) + "_" + v);
  }
  for (std::size_t p = 0; p < kSoilProperties; ++p) {
    for (std::size_t d = 0; d < kSoilDepths; ++d) {
      h.push_back("soil_" + std::to_string(p + 1) + "_" + std::to_string(d + 1));
    }
  }
  for (std::size_t k = 0; k < practices; ++k) h.push_back("practice_" + std::to_string(k + 1));
  h.push_back("yield");
  return h;
}

constexpr std::size_t kFixedColumns = 5 + kWeeks * kWeatherVars + kSoilProperties * kSoilDepths + 1;

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
  if (!(sd > 1e-12)) sd = 1.0;  // constant column: centre only
}

}  // namespace

void YieldRecord::validate(std::size_t practice_count) const {
  if (county.empty() || state.empty()) throw std::invalid_argument("yield record needs county and state ids");
  if (weather.size() != kWeeks * kWeatherVars) throw std::invalid_argument("yield record weather must be 52 x 6");
  if (soil.size() != kSoilProperties * kSoilDepths) throw std::invalid_argument("yield record soil must be 10 x 6");
  if (practices.size() != practice_count) throw std::invalid_argument("yield record practice count mismatch");
  if (!std::isfinite(yield)) throw std::invalid_argument("yield record yield must be finite");
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw std::invalid_argument("yield record latitude out of range");
}

const YieldRecord* YieldTable::find(const std::string& county, int year) const {
  auto it = index_.find({county, year});
  return it == index_.end() ? nullptr : &records[it->second];
}

std::vector<std::string> YieldTable::states() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.state);
  return {s.begin(), s.end()};
}

void YieldTable::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].validate(practice_count);
    if (!index_.emplace(std::make_pair(records[i].county, records[i].year), i).second) {
      throw std::invalid_argument("duplicate yield record for county " + records[i].county + " year " +
                                  std::to_string(records[i].year));
    }
  }
}

YieldTable read_yield_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open yield csv " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("yield csv is empty: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < kFixedColumns) throw std::runtime_error("yield csv header has too few columns");
  YieldTable table;
  table.practice_count = header.size() - kFixedColumns;
  if (header != header_for(table.practice_count)) throw std::runtime_error("yield csv header does not match the schema");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("yield csv line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(header.size()));
    }
    YieldRecord r;
    r.county = cells[0];
    r.state = cells[1];
    r.year = static_cast<int>(parse_number(cells[2], line_no));
    r.latitude = parse_number(cells[3], line_no);
    r.longitude = parse_number(cells[4], line_no);
    std::size_t c = 5;
    for (std::size_t k = 0; k < kWeeks * kWeatherVars; ++k) r.weather.push_back(static_cast<float>(parse_number(cells[c++], line_no)));
    for (std::size_t k = 0; k < kSoilProperties * kSoilDepths; ++k) r.soil.push_back(static_cast<float>(parse_number(cells[c++], line_no)));
    for (std::size_t k = 0; k < table.practice_count; ++k) r.practices.push_back(static_cast<float>(parse_number(cells[c++], line_no)));
    r.yield = parse_number(cells[c], line_no);
    table.records.push_back(std::move(r));
  }
  table.reindex();
  return table;
}

void write_yield_csv(const std::filesystem::path& path, const YieldTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write yield csv " + path.string());
  out.precision(9);
  const auto header = header_for(table.practice_count);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& r : table.records) {
    out << r.county << ',' << r.state << ',' << r.year << ',' << r.latitude << ',' << r.longitude;
    for (float v : r.weather) out << ',' << v;
    for (float v : r.soil) out << ',' << v;
    for (float v : r.practices) out << ',' << v;
    out << ',' << r.yield << '\n';
  }
}

YieldScaler YieldScaler::fit(const std::vector<const YieldRecord*>& records) {
  if (records.empty()) throw std::invalid_argument("YieldScaler::fit needs records");
  YieldScaler s;
  std::vector<double> col;
  for (std::size_t v = 0; v < kWeatherVars; ++v) {
    col.clear();
    for (const auto* r : records) {
      for (std::size_t w = 0; w < kWeeks; ++w) col.push_back(r->weather[w * kWeatherVars + v]);
    }
    mean_std(col, s.weather_mean[v], s.weather_std[v]);
  }
  auto fit_columns = [&](std::size_t n, auto get, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(n, 0.0);
    sd.assign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
      col.clear();
      for (const auto* r : records) col.push_back(get(*r, k));
      mean_std(col, mean[k], sd[k]);
    }
  };
  fit_columns(kSoilProperties * kSoilDepths, [](const YieldRecord& r, std::size_t k) { return double(r.soil[k]); },
              s.soil_mean, s.soil_std);
  fit_columns(records.front()->practices.size(),
              [](const YieldRecord& r, std::size_t k) { return double(r.practices[k]); }, s.practice_mean,
              s.practice_std);
  col.clear();
  for (const auto* r : records) col.push_back(r->yield);
  mean_std(col, s.yield_mean, s.yield_std);
  return s;
}

nlohmann::json YieldScaler::to_json() const {
  return {{"weather_mean", weather_mean}, {"weather_std", weather_std}, {"soil_mean", soil_mean},
          {"soil_std", soil_std},         {"practice_mean", practice_mean}, {"practice_std", practice_std},
          {"yield_mean", yield_mean},     {"yield_std", yield_std}};
}

std::vector<YieldSample> build_samples(const YieldTable& table, const std::vector<std::string>& states,
                                       std::size_t history, const YieldScaler& scaler) {
  if (history < 1 || history > 7) throw std::invalid_argument("history must be 1..7 years");
  const std::set<std::string> wanted(states.begin(), states.end());
  std::vector<YieldSample> out;
  for (const auto& rec : table.records) {
    if (!wanted.contains(rec.state)) continue;
    const YieldRecord* prev = table.find(rec.county, rec.year - 1);
    if (prev == nullptr) continue;
    std::vector<const YieldRecord*> span;
    for (int y = rec.year - static_cast<int>(history) + 1; y <= rec.year; ++y) span.push_back(table.find(rec.county, y));
    if (std::find(span.begin(), span.end(), nullptr) != span.end()) continue;

    YieldSample s;
    s.county = rec.county;
    s.state = rec.state;
    s.year = rec.year;
    s.latitude = rec.latitude;
    s.longitude = rec.longitude;
    s.target = rec.yield;
    s.target_standardized = static_cast<float>(scaler.from_bushels(rec.yield));
    for (const auto* yr : span) {
      YearBlock b;
      b.year = yr->year;
      b.weather = ad::Tensor<float>(kWeeks, kWeatherVars);
      for (std::size_t w = 0; w < kWeeks; ++w) {
        for (std::size_t v = 0; v < kWeatherVars; ++v) {
          b.weather(w, v) = static_cast<float>((yr->weather[w * kWeatherVars + v] - scaler.weather_mean[v]) /
                                               scaler.weather_std[v]);
        }
      }
      // the target year's own yield is replaced by last year's
      const YieldRecord* source = yr->year == rec.year ? prev : yr;
      b.yield_input = static_cast<float>(scaler.from_bushels(source->yield));
      b.yield_source_year = source->year;
      s.years.push_back(std::move(b));
    }
    s.soil = ad::Tensor<float>(kSoilDepths, kSoilProperties);
    for (std::size_t p = 0; p < kSoilProperties; ++p) {
      for (std::size_t d = 0; d < kSoilDepths; ++d) {
        const std::size_t k = p * kSoilDepths + d;
        s.soil(d, p) = static_cast<float>((rec.soil[k] - scaler.soil_mean[k]) / scaler.soil_std[k]);
      }
    }
    s.practices = ad::Tensor<float>(1, table.practice_count);
    for (std::size_t k = 0; k < table.practice_count; ++k) {
      s.practices[k] = static_cast<float>((rec.practices[k] - scaler.practice_mean[k]) / scaler.practice_std[k]);
    }
    check_no_target_leak(s, table);
    out.push_back(std::move(s));
  }
  return out;
}

void check_no_target_leak(const YieldSample& sample, const YieldTable& table) {
  const YieldRecord* target = table.find(sample.county, sample.year);
  if (target == nullptr) throw std::logic_error("sample target not in table");
  for (const auto& b : sample.years) {
    if (b.yield_source_year >= sample.year) {
      throw std::logic_error("target-year yield used as input for " + sample.county + " " + std::to_string(sample.year));
    }
    const YieldRecord* src = table.find(sample.county, b.yield_source_year);
    if (src == nullptr || src->yield == target->yield) {
      // equal values from a different year are possible in real data but
      // would make the check ambiguous; treat them as a leak
      throw std::logic_error("input yield for " + sample.county + " " + std::to_string(sample.year) +
                             " matches the target value");
    }
  }
  if (sample.years.empty() || sample.years.back().year != sample.year ||
      sample.years.back().yield_source_year != sample.year - 1) {
    throw std::logic_error("target year block must carry last year's yield");
  }
}

SplitPlan SplitPlan::make(std::vector<std::string> states, std::uint64_t seed, std::size_t folds,
                          std::size_t validation_states) {
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  if (states.size() != 9) throw std::invalid_argument("split plan expects 9 states, got " + std::to_string(states.size()));
  if (folds == 0 || validation_states == 0 || validation_states >= states.size()) {
    throw std::invalid_argument("invalid fold layout");
  }
  SplitPlan plan;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t f = 0; f < folds; ++f) {
    auto shuffled = states;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    Fold fold;
    fold.validation.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(validation_states));
    fold.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(validation_states), shuffled.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

double rmse(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("rmse: size mismatch");
  if (truth.empty()) throw std::invalid_argument("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) ss += (predictions[i] - truth[i]) * (predictions[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

YieldTable generate_yield_synthetic(const YieldSynthSpec& spec, std::uint64_t seed) {
  if (spec.years < 2 || spec.counties_per_state == 0) throw std::invalid_argument("yield synth needs >= 2 years");
  static const std::array<const char*, 9> kStates = {"IA", "IL", "IN", "KS", "MN", "MO", "NE", "OH", "SD"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> jitter(-0.6, 0.6);

  // fixed soil loadings: quality maps onto every property/depth
  std::array<double, kSoilProperties * kSoilDepths> soil_load{};
  for (auto& a : soil_load) a = 0.5 + 0.5 * std::abs(z(rng));

  YieldTable table;
  table.practice_count = spec.practice_count;
  struct Pending {
    std::size_t record;
    double base;
    double driver;
  };
  std::vector<Pending> pending;
  const data::Date start = data::make_date(spec.first_year, 1, 1);
  std::size_t days = 0;
  for (int y = spec.first_year; y < spec.first_year + spec.years; ++y) days += static_cast<std::size_t>(data::days_in_year(y));

  for (std::size_t s = 0; s < kStates.size(); ++s) {
    const double state_effect = 3.0 * z(rng);
    const double lat0 = 40.8 + 1.3 * static_cast<double>(s / 3);
    const double lon0 = -100.0 + 3.5 * static_cast<double>(s % 3);
    for (std::size_t c = 0; c < spec.counties_per_state; ++c) {
      const std::string county = std::string(kStates[s]) + "-" + std::to_string(c + 1);
      const data::Coordinate at{lat0 + jitter(rng), lon0 + jitter(rng)};
      const double quality = z(rng);
      std::vector<float> soil(kSoilProperties * kSoilDepths);
      for (std::size_t k = 0; k < soil.size(); ++k) soil[k] = static_cast<float>(quality * soil_load[k] + 0.3 * z(rng));
      std::mt19937_64 wrng(rng());
      const auto daily = data::synthesize_point(
          spec.latent_weather ? data::SynthKind::kLinearLatent : data::SynthKind::kPhysical, at, start, days,
          spec.weather_noise, wrng);
      const double base = 45.0 + state_effect + 4.0 * quality;
      std::size_t offset = 0;
      for (int y = spec.first_year; y < spec.first_year + spec.years; ++y) {
        YieldRecord r;
        r.county = county;
        r.state = kStates[s];
        r.year = y;
        r.latitude = at.latitude;
        r.longitude = at.longitude;
        r.weather.assign(kWeeks * kWeatherVars, 0.0f);
        for (std::size_t w = 0; w < kWeeks; ++w) {
          for (std::size_t v = 0; v < kWeatherVars; ++v) {
            double acc = 0.0;
            for (std::size_t d = 0; d < 7; ++d) acc += daily.at(offset + 7 * w + d, kWeatherSlots[v]);
            r.weather[w * kWeatherVars + v] = static_cast<float>(acc / 7.0);
          }
        }
        r.soil = soil;
        for (std::size_t k = 0; k < spec.practice_count; ++k) r.practices.push_back(static_cast<float>(z(rng)));
        std::size_t w0 = 0, w1 = kWeeks;
        if (spec.driver == YieldDriver::kJulyPrecipitation) {
          w0 = 26;
          w1 = 31;
        } else if (spec.driver == YieldDriver::kSeasonEt0) {
          w0 = 13;
          w1 = 39;
        }
        double driver = 0.0;
        if (spec.driver == YieldDriver::kSeasonEt0) {
          for (std::size_t d = 7 * w0; d < 7 * w1; ++d) driver += daily.at(offset + d, data::kET0);
          driver /= static_cast<double>(7 * (w1 - w0));
        } else {
          for (std::size_t w = w0; w < w1; ++w) driver += r.weather[w * kWeatherVars + 0];
          driver /= static_cast<double>(w1 - w0);
        }
        pending.push_back({table.records.size(), base, driver});
        table.records.push_back(std::move(r));
        offset += static_cast<std::size_t>(data::days_in_year(y));
      }
    }
  }

  // standardize the driver over the whole table, then roll yields forward
  double mean = 0.0, sd = 0.0;
  for (const auto& p : pending) mean += p.driver;
  mean /= static_cast<double>(pending.size());
  for (const auto& p : pending) sd += (p.driver - mean) * (p.driver - mean);
  sd = std::sqrt(sd / static_cast<double>(pending.size()));
  if (!(sd > 0.0)) sd = 1.0;
  double prev_dev = 0.0;
  for (const auto& p : pending) {
    auto& r = table.records[p.record];
    if (r.year == spec.first_year) prev_dev = 0.0;
    const double practice = spec.practice_count > 0 ? 1.0 * r.practices[0] : 0.0;
    const double dev = spec.autoregression * prev_dev + spec.weather_effect * (p.driver - mean) / sd + practice +
                       spec.noise_sigma * z(rng);
    r.yield = p.base + dev;
    prev_dev = dev;
  }
  table.reindex();
  return table;
}

}  // namespace wf::yield
