#include "weatherformer/data/processing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace wf::data {

using namespace std::chrono;

GridTile impute_missing(GridTile tile) {
  const std::size_t n_years = tile.year_count();
  for (std::size_t c = 0; c < tile.series.size(); ++c) {
    auto& years = tile.series[c];
    if (years.size() != n_years) throw std::invalid_argument("tile needs one series per year");
    // validity is judged on the original data so filled cells never feed later fills
    std::vector<std::vector<char>> valid(n_years);
    for (std::size_t y = 0; y < n_years; ++y) {
      valid[y].resize(years[y].valid_len * kMeasurementCount);
      for (std::size_t k = 0; k < valid[y].size(); ++k) valid[y][k] = !std::isnan(years[y].values[k]);
    }
    const auto original = years;
    for (std::size_t y = 0; y < n_years; ++y) {
      auto& s = years[y];
      for (std::size_t r = 0; r < s.valid_len; ++r) {
        for (std::size_t m = 0; m < kMeasurementCount; ++m) {
          const std::size_t k = r * kMeasurementCount + m;
          if (valid[y][k]) continue;
          bool filled = false;
          for (std::size_t p = y; p-- > 0;) {
            if (r < original[p].valid_len && valid[p][k]) {
              s.values[k] = original[p].values[k];
              filled = true;
              break;
            }
          }
          if (filled) continue;
          double sum = 0.0;
          int count = 0;
          for (std::size_t q = 0; q < n_years; ++q) {
            if (r < original[q].valid_len && valid[q][k]) {
              sum += original[q].values[k];
              ++count;
            }
          }
          if (count == 0) {
            throw std::runtime_error("measurement " + std::string(catalog()[m].symbol) +
                                     " missing in every year at coordinate " + std::to_string(c) +
                                     ", day " + std::to_string(r));
          }
          s.values[k] = static_cast<float>(sum / count);
        }
      }
    }
  }
  return tile;
}

std::size_t count_missing(const GridTile& tile) {
  std::size_t n = 0;
  for (const auto& per_coord : tile.series) {
    for (const auto& s : per_coord) {
      for (std::size_t k = 0; k < s.valid_len * kMeasurementCount; ++k) n += std::isnan(s.values[k]);
    }
  }
  return n;
}

WeatherSeries concatenate(std::span<const WeatherSeries> pieces) {
  if (pieces.empty()) throw std::invalid_argument("concatenate: no series");
  WeatherSeries out;
  out.granularity_days = 1;
  out.latitude = pieces[0].latitude;
  out.longitude = pieces[0].longitude;
  out.start_date = pieces[0].start_date;
  out.standardized = pieces[0].standardized;
  std::int64_t expected = day_index(pieces[0].start_date);
  for (const auto& p : pieces) {
    if (p.granularity_days != 1) throw std::invalid_argument("concatenate: series must be daily");
    if (day_index(p.start_date) != expected) throw std::invalid_argument("concatenate: gap between series");
    out.values.insert(out.values.end(), p.values.begin(),
                      p.values.begin() + static_cast<std::ptrdiff_t>(p.valid_len * kMeasurementCount));
    out.rows += p.valid_len;
    expected += static_cast<std::int64_t>(p.valid_len);
  }
  out.valid_len = out.rows;
  return out;
}

namespace {

void append_window_mean(const WeatherSeries& daily, std::size_t begin, std::size_t end,
                        std::vector<float>& out) {
  for (std::size_t m = 0; m < kMeasurementCount; ++m) {
    double sum = 0.0;
    for (std::size_t r = begin; r < end; ++r) sum += daily.at(r, m);
    out.push_back(static_cast<float>(sum / static_cast<double>(end - begin)));
  }
}

}  // namespace

WeatherSeries aggregate(const WeatherSeries& daily, int granularity_days) {
  if (daily.granularity_days != 1) throw std::invalid_argument("aggregate: input must be daily");
  WeatherSeries out;
  out.granularity_days = granularity_days;
  out.latitude = daily.latitude;
  out.longitude = daily.longitude;
  out.standardized = daily.standardized;
  out.start_date = daily.start_date;
  if (granularity_days == 1) return daily;
  if (granularity_days == 7) {
    const std::size_t n = daily.valid_len / 7;
    for (std::size_t w = 0; w < n; ++w) append_window_mean(daily, 7 * w, 7 * w + 7, out.values);
    out.rows = n;
  } else if (granularity_days == 30) {
    const auto start = sys_days{daily.start_date};
    const auto end = start + days{static_cast<std::int64_t>(daily.valid_len)};
    year_month ym{daily.start_date.year(), daily.start_date.month()};
    if (daily.start_date.day() != day{1}) ym += months{1};
    bool first = true;
    for (;; ym += months{1}) {
      const auto lo = sys_days{ym / day{1}};
      const auto hi = sys_days{(ym + months{1}) / day{1}};
      if (hi > end) break;
      if (first) {
        out.start_date = year_month_day{lo};
        first = false;
      }
      append_window_mean(daily, static_cast<std::size_t>((lo - start).count()),
                         static_cast<std::size_t>((hi - start).count()), out.values);
      ++out.rows;
    }
  } else {
    throw std::invalid_argument("aggregate: granularity must be 7 or 30");
  }
  out.valid_len = out.rows;
  return out;
}

GridTile aggregate(const GridTile& daily, int granularity_days) {
  if (daily.granularity_days != 1) throw std::invalid_argument("aggregate: tile must be daily");
  GridTile out = daily;
  out.granularity_days = granularity_days;
  for (auto& per_coord : out.series) {
    for (auto& s : per_coord) s = aggregate(s, granularity_days);
  }
  return out;
}

void StandardizationStats::validate() const {
  for (std::size_t m = 0; m < kMeasurementCount; ++m) {
    if (!std::isfinite(mean[m]) || !(std[m] > 0.0) || !std::isfinite(std[m])) {
      throw std::invalid_argument("standardization std must be positive for " +
                                  std::string(catalog()[m].symbol));
    }
  }
}

nlohmann::json StandardizationStats::to_json() const {
  nlohmann::json j;
  j["computed_on"] = computed_on;
  j["mean"] = mean;
  j["std"] = std;
  return j;
}

StandardizationStats StandardizationStats::from_json(const nlohmann::json& j) {
  StandardizationStats s;
  s.computed_on = j.at("computed_on").get<std::string>();
  s.mean = j.at("mean").get<std::array<double, kMeasurementCount>>();
  s.std = j.at("std").get<std::array<double, kMeasurementCount>>();
  s.validate();
  return s;
}

namespace {

struct Moments {
  std::array<double, kMeasurementCount> sum{};
  std::array<double, kMeasurementCount> sum_sq{};
  std::size_t n = 0;

  void add(const WeatherSeries& s) {
    for (std::size_t r = 0; r < s.valid_len; ++r) {
      for (std::size_t m = 0; m < kMeasurementCount; ++m) {
        const double v = s.at(r, m);
        sum[m] += v;
        sum_sq[m] += v * v;
      }
    }
    n += s.valid_len;
  }

  StandardizationStats finish() const {
    if (n == 0) throw std::invalid_argument("compute_stats: no training rows");
    StandardizationStats st;
    for (std::size_t m = 0; m < kMeasurementCount; ++m) {
      st.mean[m] = sum[m] / static_cast<double>(n);
      st.std[m] = std::sqrt(std::max(0.0, sum_sq[m] / static_cast<double>(n) - st.mean[m] * st.mean[m]));
    }
    st.validate();
    return st;
  }
};

}  // namespace

StandardizationStats compute_stats(std::span<const GridTile> tiles) {
  Moments acc;
  for (const auto& t : tiles) {
    if (t.split != SplitTag::kTrain) continue;
    for (const auto& per_coord : t.series) {
      for (const auto& s : per_coord) acc.add(s);
    }
  }
  return acc.finish();
}

StandardizationStats compute_stats(std::span<const WeatherSeries> series) {
  Moments acc;
  for (const auto& s : series) acc.add(s);
  return acc.finish();
}

WeatherSeries standardize(const WeatherSeries& s, const StandardizationStats& stats) {
  stats.validate();
  WeatherSeries out = s;
  for (std::size_t r = 0; r < s.valid_len; ++r) {
    for (std::size_t m = 0; m < kMeasurementCount; ++m) {
      out.at(r, m) = static_cast<float>((s.at(r, m) - stats.mean[m]) / stats.std[m]);
    }
  }
  out.standardized = true;
  return out;
}

WeatherSeries destandardize(const WeatherSeries& s, const StandardizationStats& stats) {
  stats.validate();
  WeatherSeries out = s;
  for (std::size_t r = 0; r < s.valid_len; ++r) {
    for (std::size_t m = 0; m < kMeasurementCount; ++m) {
      out.at(r, m) = static_cast<float>(s.at(r, m) * stats.std[m] + stats.mean[m]);
    }
  }
  out.standardized = false;
  return out;
}

GridTile standardize(const GridTile& t, const StandardizationStats& stats) {
  GridTile out = t;
  for (auto& per_coord : out.series) {
    for (auto& s : per_coord) s = standardize(s, stats);
  }
  return out;
}

std::pair<std::vector<GridTile>, std::vector<GridTile>> split_dataset(std::vector<GridTile> tiles,
                                                                      double val_fraction,
                                                                      std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must be in (0, 1)");
  }
  if (tiles.size() < 2) throw std::invalid_argument("split_dataset needs at least 2 tiles");
  const std::size_t n = tiles.size();
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(val_fraction * n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_val(n, 0);
  for (std::size_t i = 0; i < std::min(n_val, n - 1); ++i) is_val[order[i]] = 1;

  std::pair<std::vector<GridTile>, std::vector<GridTile>> out;
  for (std::size_t i = 0; i < n; ++i) {
    tiles[i].split = is_val[i] ? SplitTag::kValidation : SplitTag::kTrain;
    (is_val[i] ? out.second : out.first).push_back(std::move(tiles[i]));
  }
  return out;
}

}  // namespace wf::data
