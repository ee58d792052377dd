#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "weatherformer/data/series.hpp"

namespace wf::data {

enum class SynthKind {
  /// Seasonal sinusoids per variable with latitude-dependent phase and
  /// amplitude; dependent variables (dew point, humidity, snow, derived
  /// ET0/VAP/VAD) are computed from the noisy primaries.
  kPhysical,
  /// Every column is loading_m * s(t) + sigma * noise, where s(t) is a shared
  /// seasonal signal plus an AR(1) anomaly. Any 10 columns are then an exact
  /// linear function of any other 21 when sigma = 0.
  kLinearLatent,
};

struct SynthSpec {
  std::size_t tiles = 2;
  int first_year = 2000;
  int years = 1;
  double noise_sigma = 0.0;
  SynthKind kind = SynthKind::kPhysical;
  /// 0 keeps all 160 grid points; otherwise an evenly spaced subset.
  std::size_t points_per_tile = 0;
};

/// Fixed per-measurement loadings of the latent mode. They do not depend on
/// the dataset seed, so separately generated datasets share one "climate".
const std::array<double, kMeasurementCount>& latent_loadings();

/// Bounds of tile k in the synthetic layout (6 tiles per 5-degree band).
Bounds synthetic_tile_bounds(std::size_t k);

/// One coordinate's daily series starting at `start`.
WeatherSeries synthesize_point(SynthKind kind, const Coordinate& at, const Date& start, std::size_t days,
                               double noise_sigma, std::mt19937_64& rng);

std::vector<GridTile> generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace wf::data
