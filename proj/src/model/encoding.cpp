#include "weatherformer/model/encoding.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wf::model {

PaddingMask::PaddingMask(std::size_t n, bool real) : n_(n) {
  if (n > kCapacity) throw std::invalid_argument("sequence longer than 365 steps: " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) flags_[i] = real;
}

PaddingMask PaddingMask::prefix(std::size_t n, std::size_t valid_len) {
  if (valid_len > n) throw std::invalid_argument("valid_len exceeds sequence length");
  PaddingMask m(n, false);
  for (std::size_t i = 0; i < valid_len; ++i) m.flags_[i] = true;
  return m;
}

std::size_t PaddingMask::real_count() const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_; ++i) k += flags_[i];
  return k;
}

void SpatioTemporalContext::validate() const {
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw std::invalid_argument("latitude outside [-90, 90]");
  if (!std::isfinite(longitude)) throw std::invalid_argument("longitude must be finite");
  if (granularity_days < 1 || granularity_days > 30) {
    throw std::invalid_argument("granularity must be in 1..30, got " + std::to_string(granularity_days));
  }
}

SpatioTemporalContext SpatioTemporalContext::from_series(const data::WeatherSeries& s) {
  SpatioTemporalContext c;
  c.latitude = s.latitude;
  c.longitude = s.longitude;
  c.year = static_cast<int>(s.start_date.year());
  c.start_day_index = data::day_index(s.start_date);
  c.granularity_days = s.granularity_days;
  return c;
}

double wrap_degrees(double deg) { return deg - 360.0 * std::floor((deg + 180.0) / 360.0); }

ad::Tensor<double> spatiotemporal_encoding(const SpatioTemporalContext& ctx, std::size_t n, std::size_t d_model) {
  if (d_model == 0 || d_model % 4 != 0) {
    throw std::invalid_argument("d_model must be divisible by 4, got " + std::to_string(d_model));
  }
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const double lat = wrap_degrees(ctx.latitude) * kDegToRad;
  const double lng = wrap_degrees(ctx.longitude) * kDegToRad;
  ad::Tensor<double> pe(n, d_model);
  for (std::size_t i = 0; i < d_model / 4; ++i) {
    const double w = std::pow(10000.0, -4.0 * static_cast<double>(i) / static_cast<double>(d_model));
    const double lat_ch = std::sin(lat * w);
    const double lng_ch = std::cos(lng * w);
    for (std::size_t t = 0; t < n; ++t) {
      const double pos = static_cast<double>(ctx.start_day_index) +
                         static_cast<double>(t) * static_cast<double>(ctx.granularity_days);
      pe(t, 4 * i) = std::sin(pos * w);
      pe(t, 4 * i + 1) = std::cos(pos * w);
      pe(t, 4 * i + 2) = lat_ch;
      pe(t, 4 * i + 3) = lng_ch;
    }
  }
  return pe;
}

template <typename T>
ad::Tensor<T> apply_scalers(const ad::Tensor<T>& x, int granularity_days, const ad::Tensor<T>& scalers,
                            const FeatureMask& mask) {
  if (granularity_days < 1 || granularity_days > static_cast<int>(kScalerRows)) {
    throw std::invalid_argument("granularity must be in 1..30, got " + std::to_string(granularity_days));
  }
  if (x.cols() != data::kMeasurementCount || scalers.rows() != kScalerRows ||
      scalers.cols() != data::kMeasurementCount) {
    throw ad::ShapeError("apply_scalers: expected N x 31 input and a 30 x 31 table");
  }
  ad::Tensor<T> out(x.rows(), x.cols());
  const auto row = scalers.row(static_cast<std::size_t>(granularity_days - 1));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t m = 0; m < x.cols(); ++m) out(r, m) = mask[m] ? x(r, m) * row[m] : T{0};
  }
  return out;
}

template ad::Tensor<float> apply_scalers(const ad::Tensor<float>&, int, const ad::Tensor<float>&,
                                         const FeatureMask&);
template ad::Tensor<double> apply_scalers(const ad::Tensor<double>&, int, const ad::Tensor<double>&,
                                          const FeatureMask&);

}  // namespace wf::model
