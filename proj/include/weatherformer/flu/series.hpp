#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weatherformer/data/series.hpp"

namespace wf::flu {

/// MMWR epidemiological week: weeks start on Sunday and week 1 is the week
/// containing January 4th.
struct Epiweek {
  int year = 2010;
  int week = 1;

  /// YYYYWW form used by the public ILI exports.
  int code() const { return year * 100 + week; }
  static Epiweek from_code(int code);
  data::Date start() const;
  Epiweek next() const;
  void validate() const;
  bool operator==(const Epiweek&) const = default;
  auto operator<=>(const Epiweek&) const = default;
};

int weeks_in_year(int year);
Epiweek epiweek_of(const data::Date& d);

struct IliWeek {
  Epiweek week;
  double ili_percent = 0.0;
  double patients = 0.0;
};

/// Weekly ILI records with aligned weekly weather (31 columns, natural units;
/// only columns that were supplied are meaningful).
struct IliSeries {
  std::string city;
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<IliWeek> weeks;
  std::vector<std::array<float, data::kMeasurementCount>> weather;

  std::size_t size() const { return weeks.size(); }
  /// Weeks strictly consecutive, ILI in [0, 100], weather empty or aligned.
  void validate() const;
  /// Index of the week, or size() when absent.
  std::size_t index_of(const Epiweek& w) const;
  /// Copy restricted to weeks before the first week of `year`.
  IliSeries truncated_before(int year) const;
};

/// Delphi-style export: epiweek,ili_percent,num_patients.
IliSeries read_ili_csv(const std::filesystem::path& path);
void write_ili_csv(const std::filesystem::path& path, const IliSeries& series);

/// Epiweek means of daily values, averaged over the supplied grid cells.
/// Every daily series must cover each requested week completely.
std::vector<std::array<float, data::kMeasurementCount>> weekly_weather(
    const std::vector<data::WeatherSeries>& daily_cells, const std::vector<Epiweek>& weeks);

struct IliSynthSpec {
  int first_year = 2010;
  int last_year = 2020;
  double latitude = 40.75;
  double longitude = -74.0;
  /// Weight of the lagged temperature anomaly on log incidence.
  double weather_effect = 0.6;
  double noise_sigma = 0.08;
};

/// City series whose incidence rises when the lagged weekly temperature
/// drops; temperature comes from the physical weather generator.
IliSeries generate_ili_synthetic(const IliSynthSpec& spec, std::uint64_t seed);

}  // namespace wf::flu
