#include "weatherformer/pretrain/dataset.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace wf::pretrain {

using data::kMeasurementCount;

void WindowOptions::validate() const {
  if (windows.empty()) throw std::invalid_argument("at least one granularity window is required");
  for (const auto& w : windows) {
    if (w.granularity_days < 1 || w.granularity_days > 30) {
      throw std::invalid_argument("window granularity must be in 1..30");
    }
    if (w.rows == 0 || w.rows > model::PaddingMask::kCapacity) {
      throw std::invalid_argument("window rows must be in 1..365");
    }
  }
  if (min_rows == 0) throw std::invalid_argument("min_rows must be positive");
}

std::vector<GranularityWindow> WindowOptions::parse_windows(const std::string& text) {
  std::vector<GranularityWindow> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("window spec '" + item + "' is not granularity:rows");
    try {
      out.push_back({std::stoi(item.substr(0, colon)), static_cast<std::size_t>(std::stoul(item.substr(colon + 1)))});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("window spec '" + item + "' is not granularity:rows");
    }
  }
  return out;
}

std::vector<Sample> make_windows(const data::WeatherSeries& series, std::size_t rows, std::size_t min_rows,
                                 std::size_t max_windows) {
  if (!series.standardized) throw std::invalid_argument("make_windows expects a standardized series");
  std::vector<Sample> out;
  const std::size_t g = static_cast<std::size_t>(series.granularity_days);
  const auto base = data::day_index(series.start_date);
  for (std::size_t start = 0; start < series.valid_len; start += rows) {
    if (max_windows > 0 && out.size() >= max_windows) break;
    const std::size_t real = std::min(rows, series.valid_len - start);
    if (real < min_rows) break;
    Sample s;
    s.x = ad::Tensor<float>(rows, kMeasurementCount);
    for (std::size_t r = 0; r < real; ++r) {
      for (std::size_t m = 0; m < kMeasurementCount; ++m) {
        const float v = series.at(start + r, m);
        if (!std::isfinite(v)) throw std::invalid_argument("make_windows: missing value left in series");
        s.x(r, m) = v;
      }
    }
    s.padding = model::PaddingMask::prefix(rows, real);
    s.ctx.latitude = series.latitude;
    s.ctx.longitude = series.longitude;
    s.ctx.granularity_days = series.granularity_days;
    // monthly rows do not advance by a fixed day count; 30 is the nominal step
    s.ctx.start_day_index = base + static_cast<std::int64_t>(start * g);
    s.ctx.year = static_cast<int>(data::date_from_day_index(s.ctx.start_day_index).year());
    out.push_back(std::move(s));
  }
  return out;
}

PretrainDataset build_dataset(std::span<const data::GridTile> tiles, const WindowOptions& options) {
  options.validate();
  PretrainDataset ds;
  ds.stats = data::compute_stats(tiles);
  for (const auto& tile : tiles) {
    if (tile.granularity_days != 1) throw std::invalid_argument("build_dataset expects daily tiles");
    auto& dest = tile.split == data::SplitTag::kTrain ? ds.train : ds.validation;
    for (const auto& years : tile.series) {
      const auto daily = data::standardize(data::concatenate(years), ds.stats);
      for (const auto& w : options.windows) {
        const auto series = data::aggregate(daily, w.granularity_days);
        auto windows = make_windows(series, w.rows, options.min_rows, options.max_windows_per_series);
        for (auto& s : windows) dest.push_back(std::move(s));
      }
    }
  }
  if (ds.train.empty()) throw std::invalid_argument("build_dataset: no training windows");
  if (ds.validation.empty()) throw std::invalid_argument("build_dataset: no validation windows");
  return ds;
}

}  // namespace wf::pretrain
