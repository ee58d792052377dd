#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace wf::data {

inline constexpr std::size_t kMeasurementCount = 31;
/// Measurements 0..27 come from the satellite API; 28..30 are derived.
inline constexpr std::size_t kDownloadedCount = 28;

struct MeasurementInfo {
  std::string_view symbol;
  std::string_view name;
  std::string_view unit;
};

/// Canonical measurement order. Indices are stable and used everywhere as
/// the column order of a weather matrix.
enum Measurement : std::size_t {
  kT2M = 0,
  kT2MMax,
  kT2MMin,
  kWD2M,
  kWS2M,
  kPS,
  kQV2M,
  kPrecipitation,
  kShortwaveDown,
  kEvapotranspirationFlux,
  kSoilMoisture,
  kSnowDepth,
  kDewPoint,
  kCloudAmount,
  kEvaporationLand,
  kWetBulb,
  kSnowCover,
  kLongwaveDown,
  kParTotal,
  kAlbedo,
  kPrecipitableWater,
  kRoughness,
  kAirDensity,
  kRH2M,
  kCoolingDegreeDays,
  kHeatingDegreeDays,
  kOzone,
  kAerosolDepth,
  kET0,
  kVAP,
  kVAD,
};

const std::array<MeasurementInfo, kMeasurementCount>& catalog();

/// Index of a measurement symbol such as "T2M_MAX".
std::optional<std::size_t> index_of(std::string_view symbol);

}  // namespace wf::data
