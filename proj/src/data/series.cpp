#include "weatherformer/data/series.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wf::data {

using namespace std::chrono;

std::int64_t day_index(const Date& d) {
  if (!d.ok()) throw std::invalid_argument("invalid calendar date");
  return (sys_days{d} - sys_days{kDayIndexEpoch}).count();
}

Date date_from_day_index(std::int64_t idx) {
  return year_month_day{sys_days{kDayIndexEpoch} + days{idx}};
}

Date make_date(int y, unsigned m, unsigned d) {
  Date out{year{y}, month{m}, day{d}};
  if (!out.ok()) throw std::invalid_argument("invalid calendar date");
  return out;
}

int days_in_year(int y) { return year{y}.is_leap() ? 366 : 365; }

WeatherSeries WeatherSeries::zeros(std::size_t rows, int granularity_days) {
  WeatherSeries s;
  s.rows = rows;
  s.values.assign(rows * kMeasurementCount, 0.0f);
  s.granularity_days = granularity_days;
  s.valid_len = rows;
  return s;
}

void WeatherSeries::validate() const {
  if (values.size() != rows * kMeasurementCount) {
    throw std::invalid_argument("series value count does not match rows x 31");
  }
  if (valid_len > rows) throw std::invalid_argument("valid_len exceeds row count");
  if (granularity_days < 1 || granularity_days > 30) {
    throw std::invalid_argument("granularity must be in 1..30, got " +
                                std::to_string(granularity_days));
  }
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw std::invalid_argument("latitude outside [-90, 90]");
  if (!(longitude >= -180.0 && longitude < 180.0)) {
    throw std::invalid_argument("longitude outside [-180, 180)");
  }
  for (std::size_t i = valid_len * kMeasurementCount; i < values.size(); ++i) {
    if (values[i] != 0.0f) throw std::invalid_argument("padding rows must be zero");
  }
}

std::vector<Coordinate> grid_coordinates(const Bounds& b, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
  const auto n_lat = static_cast<std::size_t>(std::llround((b.lat_max - b.lat_min) / spacing));
  const auto n_lon = static_cast<std::size_t>(std::llround((b.lon_max - b.lon_min) / spacing));
  std::vector<Coordinate> out;
  out.reserve(n_lat * n_lon);
  for (std::size_t i = 0; i < n_lat; ++i) {
    for (std::size_t j = 0; j < n_lon; ++j) {
      out.push_back({b.lat_min + spacing * (static_cast<double>(i) + 0.5),
                     b.lon_min + spacing * (static_cast<double>(j) + 0.5)});
    }
  }
  return out;
}

void GridTile::validate() const {
  if (last_year < first_year) throw std::invalid_argument("tile year range is empty");
  if (series.size() != coordinates.size()) {
    throw std::invalid_argument("tile needs one series list per coordinate");
  }
  for (const auto& per_coord : series) {
    if (per_coord.size() != year_count()) throw std::invalid_argument("tile needs one series per year");
    for (const auto& s : per_coord) {
      s.validate();
      if (s.granularity_days != granularity_days) {
        throw std::invalid_argument("series granularity differs from tile granularity");
      }
    }
  }
}

}  // namespace wf::data
