#include "weatherformer/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "weatherformer/data/meteo.hpp"

namespace wf::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAnomalyPersistence = 0.9;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Smooth positive ramp; keeps threshold-type variables from being constant.
double softplus(double x, double width) { return width * std::log1p(std::exp(x / width)); }

// Dew point from vapour pressure by inverting the liquid-water Tetens branch.
double dew_point(double vapor_kpa) {
  const double l = std::log(std::max(vapor_kpa, 1e-6) / 0.6108);
  return 237.3 * l / (17.27 - l);
}

std::vector<double> ar1_anomaly(std::size_t days, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> a(days);
  const double innov = std::sqrt(1.0 - kAnomalyPersistence * kAnomalyPersistence);
  double prev = normal(rng);
  for (auto& v : a) {
    v = prev;
    prev = kAnomalyPersistence * prev + innov * normal(rng);
  }
  return a;
}

void physical_row(std::span<float> row, double lat, double lon, std::int64_t d, double anomaly,
                  double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  auto noise = [&](double scale) { return sigma > 0.0 ? sigma * scale * normal(rng) : 0.0; };
  const double theta = kTwoPi * static_cast<double>(d) / 365.0;
  const double hemi = lat >= 0.0 ? 1.0 : -1.0;
  const double lon_rad = lon * std::numbers::pi / 180.0;
  // -1 in local midwinter, +1 in local midsummer
  const double season = -hemi * std::cos(theta - kTwoPi * 20.0 / 365.0);
  const double reach = std::min(1.0, std::abs(lat) / 45.0) + 0.1;

  const double t = std::clamp(28.0 - 0.35 * std::abs(lat) + 12.0 * reach * season + sigma * 3.0 * anomaly +
                                  noise(1.5),
                              -60.0, 50.0);
  const double rh = std::clamp(0.65 - 0.12 * season * hemi * std::sin(lon_rad) + noise(0.05), 0.05, 1.0);
  const double ps = 100.5 - 0.4 * season + noise(0.3);
  const double ws = std::max(0.1, 3.0 + std::cos(theta + lon_rad) + noise(0.8));
  const double sw = std::max(1.0, 17.0 + 8.0 * reach * season + noise(2.0));
  const double es = saturation_vapor_pressure(t);
  const double ea = es * rh;
  const double dew = std::min(t, dew_point(ea));
  const double snow = std::max(0.0, softplus(-2.0 * t, 8.0) + noise(1.0));
  const double snow_cover = clamp01(snow / 20.0);

  row[kT2M] = static_cast<float>(t);
  row[kT2MMax] = static_cast<float>(t + 6.0 + 2.0 * season + std::abs(noise(1.0)));
  row[kT2MMin] = static_cast<float>(t - 6.0 + season - std::abs(noise(1.0)));
  row[kWD2M] = static_cast<float>(std::fmod(360.0 + 180.0 + 90.0 * std::sin(theta + lon_rad) + noise(20.0), 360.0));
  row[kWS2M] = static_cast<float>(ws);
  row[kPS] = static_cast<float>(ps);
  row[kQV2M] = static_cast<float>(622.0 * ea / (ps - 0.378 * ea));
  row[kPrecipitation] = static_cast<float>(std::max(0.0, 2.5 + 2.0 * std::sin(theta + lon_rad) + noise(2.0)));
  row[kShortwaveDown] = static_cast<float>(sw);
  row[kEvapotranspirationFlux] = static_cast<float>(std::max(0.0, 0.35 * sw * (0.5 + 0.5 * rh)));
  row[kSoilMoisture] = static_cast<float>(clamp01(0.5 + 0.2 * std::cos(theta) + noise(0.05)));
  row[kSnowDepth] = static_cast<float>(snow);
  row[kDewPoint] = static_cast<float>(dew);
  row[kCloudAmount] = static_cast<float>(clamp01(0.5 - 0.2 * season + noise(0.1)));
  row[kEvaporationLand] = static_cast<float>(std::max(0.0, 20.0 + 10.0 * season + noise(3.0)));
  row[kWetBulb] = static_cast<float>(0.5 * (t + dew));
  row[kSnowCover] = static_cast<float>(snow_cover);
  row[kLongwaveDown] = static_cast<float>(27.0 + 0.3 * t + noise(1.0));
  row[kParTotal] = static_cast<float>(0.45 * sw);
  row[kAlbedo] = static_cast<float>(clamp01(0.15 + 0.5 * snow_cover));
  row[kPrecipitableWater] = static_cast<float>(1.5 * ea + 0.2);
  row[kRoughness] = static_cast<float>(0.1 + 0.05 * std::sin(lon_rad) + 0.02 * season);
  row[kAirDensity] = static_cast<float>(ps * 1000.0 / (287.05 * (t + 273.15)));
  row[kRH2M] = static_cast<float>(rh);
  row[kCoolingDegreeDays] = static_cast<float>(softplus(t - 18.3, 2.0));
  row[kHeatingDegreeDays] = static_cast<float>(softplus(18.3 - t, 2.0));
  row[kOzone] = static_cast<float>(300.0 + 20.0 * std::sin(theta) + noise(5.0));
  row[kAerosolDepth] = static_cast<float>(clamp01(0.15 + 0.05 * std::cos(theta) + noise(0.02)));
  derive_row(row);
}

}  // namespace

const std::array<double, kMeasurementCount>& latent_loadings() {
  static const std::array<double, kMeasurementCount> loadings = [] {
    std::array<double, kMeasurementCount> out{};
    std::mt19937_64 rng(0x5eed1a7e47ULL);
    std::uniform_real_distribution<double> mag(0.8, 1.25);
    std::bernoulli_distribution flip(0.3);
    for (auto& v : out) {
      v = mag(rng);
      if (flip(rng)) v = -v;
    }
    return out;
  }();
  return loadings;
}

Bounds synthetic_tile_bounds(std::size_t k) {
  const double lat_min = 40.0 - 5.0 * static_cast<double>(k / 6);
  const double lon_min = -125.0 + 8.0 * static_cast<double>(k % 6);
  return {lat_min, lat_min + 5.0, lon_min, lon_min + 8.0};
}

WeatherSeries synthesize_point(SynthKind kind, const Coordinate& at, const Date& start, std::size_t days,
                               double noise_sigma, std::mt19937_64& rng) {
  WeatherSeries s = WeatherSeries::zeros(days, 1);
  s.latitude = at.latitude;
  s.longitude = at.longitude;
  s.start_date = start;
  const std::int64_t d0 = day_index(start);
  const auto anomaly = ar1_anomaly(days, rng);
  if (kind == SynthKind::kPhysical) {
    for (std::size_t r = 0; r < days; ++r) {
      physical_row(s.row(r), at.latitude, at.longitude, d0 + static_cast<std::int64_t>(r), anomaly[r],
                   noise_sigma, rng);
    }
    return s;
  }
  const auto& load = latent_loadings();
  std::normal_distribution<double> normal;
  const double amp = 0.8 + 0.6 * std::abs(at.latitude) / 90.0;
  const double phase = (at.latitude < 0.0 ? std::numbers::pi : 0.0) + 0.1 * at.longitude * std::numbers::pi / 180.0;
  for (std::size_t r = 0; r < days; ++r) {
    const double theta = kTwoPi * static_cast<double>(d0 + static_cast<std::int64_t>(r)) / 365.0;
    const double latent = amp * std::sin(theta + phase) + 0.6 * anomaly[r];
    for (std::size_t m = 0; m < kMeasurementCount; ++m) {
      double v = load[m] * latent;
      if (noise_sigma > 0.0) v += noise_sigma * normal(rng);
      s.at(r, m) = static_cast<float>(v);
    }
  }
  return s;
}

std::vector<GridTile> generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.years < 1) throw std::invalid_argument("synthetic spec needs at least one year");
  std::vector<GridTile> tiles;
  tiles.reserve(spec.tiles);
  for (std::size_t k = 0; k < spec.tiles; ++k) {
    GridTile t;
    t.bounds = synthetic_tile_bounds(k);
    t.first_year = spec.first_year;
    t.last_year = spec.first_year + spec.years - 1;
    auto grid = grid_coordinates(t.bounds);
    if (spec.points_per_tile > 0 && spec.points_per_tile < grid.size()) {
      std::vector<Coordinate> subset;
      for (std::size_t i = 0; i < spec.points_per_tile; ++i) subset.push_back(grid[i * grid.size() / spec.points_per_tile]);
      grid = std::move(subset);
    }
    t.coordinates = grid;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(c)};
      std::mt19937_64 rng(seq);
      const Date start = make_date(spec.first_year, 1, 1);
      std::size_t total = 0;
      for (int y = spec.first_year; y <= t.last_year; ++y) total += static_cast<std::size_t>(days_in_year(y));
      const WeatherSeries all = synthesize_point(spec.kind, grid[c], start, total, spec.noise_sigma, rng);
      std::vector<WeatherSeries> per_year;
      std::size_t offset = 0;
      for (int y = spec.first_year; y <= t.last_year; ++y) {
        const auto n = static_cast<std::size_t>(days_in_year(y));
        WeatherSeries s = WeatherSeries::zeros(n, 1);
        s.latitude = all.latitude;
        s.longitude = all.longitude;
        s.start_date = make_date(y, 1, 1);
        std::copy_n(all.values.begin() + static_cast<std::ptrdiff_t>(offset * kMeasurementCount),
                    n * kMeasurementCount, s.values.begin());
        per_year.push_back(std::move(s));
        offset += n;
      }
      t.series.push_back(std::move(per_year));
    }
    tiles.push_back(std::move(t));
  }
  return tiles;
}

}  // namespace wf::data
