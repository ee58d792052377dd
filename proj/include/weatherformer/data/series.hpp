#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "weatherformer/data/catalog.hpp"

namespace wf::data {

using Date = std::chrono::year_month_day;

/// Reference date of the absolute day index used by the positional encoding.
inline constexpr Date kDayIndexEpoch{std::chrono::year{1984}, std::chrono::month{1},
                                     std::chrono::day{1}};

/// Days since 1984-01-01 (negative before it).
std::int64_t day_index(const Date& d);
Date date_from_day_index(std::int64_t idx);
Date make_date(int y, unsigned m, unsigned d);
int days_in_year(int year);

/// Weather matrix with rows = timesteps and 31 measurement columns.
struct WeatherSeries {
  std::size_t rows = 0;
  std::vector<float> values;  // row-major rows x 31
  int granularity_days = 1;
  double latitude = 0.0;
  double longitude = 0.0;
  Date start_date = kDayIndexEpoch;
  std::size_t valid_len = 0;
  bool standardized = false;

  static WeatherSeries zeros(std::size_t rows, int granularity_days = 1);

  float& at(std::size_t r, std::size_t m) { return values[r * kMeasurementCount + m]; }
  float at(std::size_t r, std::size_t m) const { return values[r * kMeasurementCount + m]; }
  std::span<float> row(std::size_t r) {
    return {values.data() + r * kMeasurementCount, kMeasurementCount};
  }
  std::span<const float> row(std::size_t r) const {
    return {values.data() + r * kMeasurementCount, kMeasurementCount};
  }
  /// Throws std::invalid_argument if sizes, granularity, coordinates or the
  /// zero-padding rule are violated.
  void validate() const;
};

struct Coordinate {
  double latitude = 0.0;
  double longitude = 0.0;
  bool operator==(const Coordinate&) const = default;
};

struct Bounds {
  double lat_min = 0.0;
  double lat_max = 5.0;
  double lon_min = 0.0;
  double lon_max = 8.0;
  bool operator==(const Bounds&) const = default;
};

/// Cell-centre coordinates of a rectangle at the given spacing; a 5 x 8 degree
/// tile at 0.5 degrees yields 160 points.
std::vector<Coordinate> grid_coordinates(const Bounds& b, double spacing = 0.5);

enum class SplitTag : std::uint8_t { kTrain = 0, kValidation = 1 };

struct GridTile {
  Bounds bounds;
  std::vector<Coordinate> coordinates;
  int first_year = 2000;
  int last_year = 2000;
  int granularity_days = 1;
  SplitTag split = SplitTag::kTrain;
  /// series[c][y] is coordinate c in year first_year + y.
  std::vector<std::vector<WeatherSeries>> series;

  std::size_t year_count() const { return static_cast<std::size_t>(last_year - first_year + 1); }
  void validate() const;
};

}  // namespace wf::data
