#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "weatherformer/data/series.hpp"

namespace wf::data {

/// Fills NaN cells of each coordinate's yearly series. A cell takes the value
/// of the same day-of-year in the most recent earlier year where that cell was
/// originally valid; if there is none, the mean over all years where it is
/// valid. Throws std::runtime_error if a cell is missing in every year.
GridTile impute_missing(GridTile tile);

/// Number of NaN cells in the valid rows of a tile.
std::size_t count_missing(const GridTile& tile);

/// Joins consecutive daily series of one coordinate into a single series.
/// Throws if the pieces are not contiguous in time or not daily.
WeatherSeries concatenate(std::span<const WeatherSeries> pieces);

/// Window means over a daily series. granularity 7 uses 7-day windows anchored
/// at the start date; granularity 30 uses calendar months (a leading partial
/// month is skipped). Trailing partial windows are dropped.
WeatherSeries aggregate(const WeatherSeries& daily, int granularity_days);
GridTile aggregate(const GridTile& daily, int granularity_days);

struct StandardizationStats {
  std::array<double, kMeasurementCount> mean{};
  std::array<double, kMeasurementCount> std{};
  std::string computed_on = "train";

  void validate() const;
  nlohmann::json to_json() const;
  static StandardizationStats from_json(const nlohmann::json& j);
};

/// Population mean and standard deviation over every valid row of the
/// training-split tiles. Validation tiles are ignored.
StandardizationStats compute_stats(std::span<const GridTile> tiles);
StandardizationStats compute_stats(std::span<const WeatherSeries> series);

WeatherSeries standardize(const WeatherSeries& s, const StandardizationStats& stats);
WeatherSeries destandardize(const WeatherSeries& s, const StandardizationStats& stats);
GridTile standardize(const GridTile& t, const StandardizationStats& stats);

/// Tile-level split. |val| = max(1, round(val_fraction * n)); the rest is
/// training. Each tile's split tag is set accordingly.
std::pair<std::vector<GridTile>, std::vector<GridTile>> split_dataset(std::vector<GridTile> tiles,
                                                                      double val_fraction,
                                                                      std::uint64_t seed);

}  // namespace wf::data
