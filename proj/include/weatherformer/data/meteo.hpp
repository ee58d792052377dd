#pragma once

#include <span>
#include <stdexcept>

namespace wf::data {

/// Saturation vapour pressure in kPa from the Tetens equation, with the
/// liquid-water branch above 0 C and the ice branch at or below it.
/// Accepts -90..60 C; throws std::out_of_range otherwise.
double saturation_vapor_pressure(double temp_c);

struct VaporPressure {
  double actual = 0.0;   // VAP, kPa
  double deficit = 0.0;  // VAD, kPa
};

/// e_a = e_s(T) * RH and deficit = e_s - e_a, with RH as a fraction in [0, 1].
VaporPressure actual_vapor_pressure_and_deficit(double temp_c, double relative_humidity);

/// Inputs of the FAO Penman-Monteith reference evapotranspiration.
struct Et0Inputs {
  double slope = 0.0;            // delta, kPa/C
  double net_radiation = 0.0;    // Rn, MJ/m^2/day
  double soil_heat_flux = 0.0;   // G, MJ/m^2/day
  double temp_c = 0.0;           // mean air temperature at 2 m
  double wind_speed = 0.0;       // u2, m/s
  double saturation_vp = 0.0;    // e_s, kPa
  double actual_vp = 0.0;        // e_a, kPa
  double psychrometric = 0.0;    // gamma, kPa/C
};

/// Reference evapotranspiration in mm/day.
double reference_et0(const Et0Inputs& in);

/// Slope of the saturation vapour pressure curve (kPa/C) at temp_c.
double vapor_pressure_slope(double temp_c);

/// Psychrometric constant (kPa/C) from surface pressure in kPa.
double psychrometric_constant(double pressure_kpa);

/// Fills the derived columns ET0, VAP and VAD of one 31-wide measurement row
/// from its primaries (T2M, WS2M, PS, shortwave/longwave down, albedo, RH2M).
/// Computation is in double precision. A NaN primary yields NaN derived values.
void derive_row(std::span<float> row);

}  // namespace wf::data
