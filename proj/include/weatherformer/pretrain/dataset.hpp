#pragma once

#include <span>
#include <string>
#include <vector>

#include "weatherformer/autodiff/tensor.hpp"
#include "weatherformer/data/processing.hpp"
#include "weatherformer/model/encoding.hpp"

namespace wf::pretrain {

/// One standardized training window. Rows past the series end are padding
/// and hold zeros.
struct Sample {
  ad::Tensor<float> x;
  model::SpatioTemporalContext ctx;
  model::PaddingMask padding;
};

struct GranularityWindow {
  int granularity_days = 1;
  std::size_t rows = 365;
};

struct WindowOptions {
  std::vector<GranularityWindow> windows{{1, 365}};
  /// Trailing windows with fewer real rows are dropped.
  std::size_t min_rows = 8;
  /// Caps the windows taken from one coordinate and granularity (0 = no cap).
  std::size_t max_windows_per_series = 0;

  void validate() const;
  /// "1:56,7:52" style list of granularity:rows pairs.
  static std::vector<GranularityWindow> parse_windows(const std::string& text);
};

struct PretrainDataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  data::StandardizationStats stats;
};

/// Cuts a standardized series into consecutive windows of `rows` rows.
std::vector<Sample> make_windows(const data::WeatherSeries& series, std::size_t rows, std::size_t min_rows,
                                 std::size_t max_windows = 0);

/// Daily, gap-free, split-tagged tiles in. Statistics come from the training
/// tiles at daily resolution and are shared by every granularity, so coarser
/// windows keep their smaller spread. Each coordinate's years are joined
/// before aggregation and windowing.
PretrainDataset build_dataset(std::span<const data::GridTile> tiles, const WindowOptions& options);

}  // namespace wf::pretrain
