#include "weatherformer/data/catalog.hpp"

namespace wf::data {

const std::array<MeasurementInfo, kMeasurementCount>& catalog() {
  static constexpr std::array<MeasurementInfo, kMeasurementCount> kCatalog{{
      {"T2M", "Temperature at 2 Meters", "C"},
      {"T2M_MAX", "Temperature at 2 Meters Maximum", "C"},
      {"T2M_MIN", "Temperature at 2 Meters Minimum", "C"},
      {"WD2M", "Wind Direction at 2 Meters", "Degrees"},
      {"WS2M", "Wind Speed at 2 Meters", "m/s"},
      {"PS", "Surface Pressure", "kPa"},
      {"QV2M", "Specific Humidity at 2 Meters", "g/Kg"},
      {"PRECTOTCORR", "Precipitation Corrected", "mm/day"},
      {"ALLSKY_SFC_SW_DWN", "All Sky Surface Shortwave Downward Irradiance", "MJ/m^2/day"},
      {"EVPTRNS", "Evapotranspiration Energy Flux", "MJ/m^2/day"},
      {"GWETPROF", "Profile Soil Moisture (0 to 1)", "0 to 1"},
      {"SNODP", "Snow Depth", "cm"},
      {"T2MDEW", "Dew/Frost Point at 2 Meters", "C"},
      {"CLOUD_AMT", "Cloud Amount", "0 to 1"},
      {"EVLAND", "Evaporation Land", "kg/m^2/s * 10^6"},
      {"T2MWET", "Wet Bulb Temperature at 2 Meters", "C"},
      {"FRSNO", "Land Snowcover Fraction", "0 to 1"},
      {"ALLSKY_SFC_LW_DWN", "All Sky Surface Longwave Downward Irradiance", "MJ/m^2/day"},
      {"ALLSKY_SFC_PAR_TOT", "All Sky Surface PAR Total", "MJ/m^2/day"},
      {"ALLSKY_SRF_ALB", "All Sky Surface Albedo", "0 to 1"},
      {"PW", "Precipitable Water", "cm"},
      {"Z0M", "Surface Roughness", "m"},
      {"RHOA", "Surface Air Density", "kg/m^3"},
      {"RH2M", "Relative Humidity at 2 Meters", "0 to 1"},
      {"CDD18_3", "Cooling Degree Days Above 18.3 C", "days"},
      {"HDD18_3", "Heating Degree Days Below 18.3 C", "days"},
      {"TO3", "Total Column Ozone", "Dobson units"},
      {"AOD_55", "Aerosol Optical Depth 55", "0 to 1"},
      {"ET0", "Reference Evapotranspiration", "mm/day"},
      {"VAP", "Vapor Pressure", "kPa"},
      {"VAD", "Vapor Pressure Deficit", "kPa"},
  }};
  return kCatalog;
}

std::optional<std::size_t> index_of(std::string_view symbol) {
  const auto& c = catalog();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].symbol == symbol) return i;
  }
  return std::nullopt;
}

}  // namespace wf::data
