#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "weatherformer/autodiff/tensor.hpp"
#include "weatherformer/data/series.hpp"

namespace wf::model {

inline constexpr std::size_t kScalerRows = 30;

/// true = measurement present.
using FeatureMask = std::array<bool, data::kMeasurementCount>;

inline FeatureMask all_features() {
  FeatureMask m;
  m.fill(true);
  return m;
}

/// One flag per timestep; true = real, false = padding. Capacity is the
/// model's maximum sequence length.
class PaddingMask {
 public:
  static constexpr std::size_t kCapacity = 365;

  PaddingMask() = default;
  explicit PaddingMask(std::size_t n, bool real = true);
  /// First valid_len rows real, the rest padding.
  static PaddingMask prefix(std::size_t n, std::size_t valid_len);

  std::size_t size() const { return n_; }
  bool operator[](std::size_t i) const { return flags_[i]; }
  void set(std::size_t i, bool real) { flags_[i] = real; }
  std::size_t real_count() const;
  std::span<const bool> span() const { return {flags_.data(), n_}; }

 private:
  std::array<bool, kCapacity> flags_{};
  std::size_t n_ = 0;
};

/// Where and when a sequence was observed.
struct SpatioTemporalContext {
  double latitude = 0.0;
  double longitude = 0.0;
  int year = 1984;
  /// Days since 1984-01-01 of the first timestep.
  std::int64_t start_day_index = 0;
  int granularity_days = 1;

  /// Latitude in [-90, 90], granularity in 1..30. Longitude may be any
  /// finite value; it is wrapped to [-180, 180).
  void validate() const;
  static SpatioTemporalContext from_series(const data::WeatherSeries& s);
};

/// Wraps degrees into [-180, 180).
double wrap_degrees(double deg);

/// N x d_model encoding. For block i with w = 10000^(-4i/d_model):
/// channel 4i = sin(pos_t w), 4i+1 = cos(pos_t w), 4i+2 = sin(lat_rad w),
/// 4i+3 = cos(lng_rad w), where pos_t = start_day_index + t * granularity.
/// Latitude and longitude are wrapped to [-180, 180) first.
ad::Tensor<double> spatiotemporal_encoding(const SpatioTemporalContext& ctx, std::size_t n, std::size_t d_model);

/// x * scalers[granularity] * mask, row-broadcast. `scalers` is 30 x 31 with
/// row g-1 holding granularity g.
template <typename T>
ad::Tensor<T> apply_scalers(const ad::Tensor<T>& x, int granularity_days, const ad::Tensor<T>& scalers,
                            const FeatureMask& mask);

}  // namespace wf::model
