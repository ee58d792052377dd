#include "weatherformer/data/meteo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "weatherformer/data/catalog.hpp"

namespace wf::data {

namespace {
constexpr double kStefanBoltzmannDaily = 4.903e-9;  // MJ K^-4 m^-2 day^-1
}

double saturation_vapor_pressure(double temp_c) {
  if (!std::isfinite(temp_c) || temp_c < -90.0 || temp_c > 60.0) {
    throw std::out_of_range("temperature outside -90..60 C: " + std::to_string(temp_c));
  }
  if (temp_c > 0.0) return 0.6108 * std::exp(17.27 * temp_c / (temp_c + 237.3));
  return 0.6108 * std::exp(21.87 * temp_c / (temp_c + 265.5));
}

VaporPressure actual_vapor_pressure_and_deficit(double temp_c, double relative_humidity) {
  if (!(relative_humidity >= 0.0 && relative_humidity <= 1.0)) {
    throw std::out_of_range("relative humidity outside [0, 1]: " +
                            std::to_string(relative_humidity));
  }
  const double es = saturation_vapor_pressure(temp_c);
  VaporPressure out;
  out.actual = es * relative_humidity;
  out.deficit = es - out.actual;
  return out;
}

double reference_et0(const Et0Inputs& in) {
  const double vals[] = {in.slope,      in.net_radiation, in.soil_heat_flux, in.temp_c,
                         in.wind_speed, in.saturation_vp, in.actual_vp,      in.psychrometric};
  for (double v : vals) {
    if (!std::isfinite(v)) throw std::invalid_argument("reference_et0: non-finite input");
  }
  if (in.temp_c <= -273.0) throw std::invalid_argument("reference_et0: temperature <= -273 C");
  const double denom = in.slope + in.psychrometric * (1.0 + 0.34 * in.wind_speed);
  if (!(denom > 0.0)) throw std::invalid_argument("reference_et0: non-positive denominator");
  const double radiative = 0.408 * in.slope * (in.net_radiation - in.soil_heat_flux);
  const double aerodynamic = in.psychrometric * (900.0 / (in.temp_c + 273.0)) * in.wind_speed *
                             (in.saturation_vp - in.actual_vp);
  return (radiative + aerodynamic) / denom;
}

double vapor_pressure_slope(double temp_c) {
  const double d = temp_c + 237.3;
  return 4098.0 * (0.6108 * std::exp(17.27 * temp_c / d)) / (d * d);
}

double psychrometric_constant(double pressure_kpa) { return 0.665e-3 * pressure_kpa; }

void derive_row(std::span<float> row) {
  if (row.size() != kMeasurementCount) throw std::invalid_argument("derive_row: row must have 31 entries");
  const double t = row[kT2M];
  const double rh = row[kRH2M];
  const double u2 = row[kWS2M];
  const double ps = row[kPS];
  const double sw = row[kShortwaveDown];
  const double lw = row[kLongwaveDown];
  const double albedo = row[kAlbedo];
  for (double v : {t, rh, u2, ps, sw, lw, albedo}) {
    if (std::isnan(v)) {
      constexpr float nan = std::numeric_limits<float>::quiet_NaN();
      row[kET0] = row[kVAP] = row[kVAD] = nan;
      return;
    }
  }
  const auto vp = actual_vapor_pressure_and_deficit(t, rh);
  const double es = vp.actual + vp.deficit;
  const double tk = t + 273.16;
  Et0Inputs in;
  in.slope = vapor_pressure_slope(t);
  in.net_radiation = (1.0 - albedo) * sw + lw - kStefanBoltzmannDaily * tk * tk * tk * tk;
  in.soil_heat_flux = 0.0;
  in.temp_c = t;
  in.wind_speed = u2;
  in.saturation_vp = es;
  in.actual_vp = vp.actual;
  in.psychrometric = psychrometric_constant(ps);
  // negative values would mean condensation; a reference crop rate is >= 0
  row[kET0] = static_cast<float>(std::max(0.0, reference_et0(in)));
  row[kVAP] = static_cast<float>(vp.actual);
  row[kVAD] = static_cast<float>(vp.deficit);
}

}  // namespace wf::data
