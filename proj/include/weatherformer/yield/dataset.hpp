#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "weatherformer/autodiff/tensor.hpp"
#include "weatherformer/data/catalog.hpp"

namespace wf::yield {

inline constexpr std::size_t kWeeks = 52;
inline constexpr std::size_t kWeatherVars = 6;
inline constexpr std::size_t kSoilProperties = 10;
inline constexpr std::size_t kSoilDepths = 6;

/// Column names of the six weekly weather variables, in CSV order.
inline constexpr std::array<const char*, kWeatherVars> kWeatherNames = {"prcp", "srad", "swe", "tmax", "tmin", "vp"};

/// Measurement slot each yield weather variable occupies in the 31-wide
/// encoder input. Snow water equivalent uses snow depth as the nearest slot.
inline constexpr std::array<std::size_t, kWeatherVars> kWeatherSlots = {
    data::kPrecipitation, data::kShortwaveDown, data::kSnowDepth, data::kT2MMax, data::kT2MMin, data::kVAP};

/// One county-year row of the yield table.
struct YieldRecord {
  std::string county;
  std::string state;
  int year = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<float> weather;  // 52 x 6, week-major
  std::vector<float> soil;     // 10 x 6, property-major as in the CSV
  std::vector<float> practices;
  double yield = 0.0;          // Bu/Acre

  void validate(std::size_t practice_count) const;
};

struct YieldTable {
  std::vector<YieldRecord> records;
  std::size_t practice_count = 0;

  const YieldRecord* find(const std::string& county, int year) const;
  std::vector<std::string> states() const;
  void reindex();

 private:
  std::map<std::pair<std::string, int>, std::size_t> index_;
};

/// CSV layout: county,state,year,latitude,longitude, then w<week>_<var> for
/// weeks 1..52 and vars prcp,srad,swe,tmax,tmin,vp, then soil_<p>_<d> for
/// properties 1..10 and depths 1..6, then practice_<k>..., then yield.
YieldTable read_yield_csv(const std::filesystem::path& path);
void write_yield_csv(const std::filesystem::path& path, const YieldTable& table);

/// Per-column standardization fitted on training records.
struct YieldScaler {
  std::array<double, kWeatherVars> weather_mean{}, weather_std{};
  std::vector<double> soil_mean, soil_std, practice_mean, practice_std;
  double yield_mean = 0.0, yield_std = 1.0;

  static YieldScaler fit(const std::vector<const YieldRecord*>& records);
  double to_bushels(double standardized) const { return standardized * yield_std + yield_mean; }
  double from_bushels(double bushels) const { return (bushels - yield_mean) / yield_std; }
  nlohmann::json to_json() const;
};

/// One year of model input.
struct YearBlock {
  int year = 0;
  ad::Tensor<float> weather;  // 52 x 6, standardized
  /// Standardized yield fed as input. For the target year this is the
  /// previous year's yield.
  float yield_input = 0.0f;
  int yield_source_year = 0;
};

/// A prediction target with `history` years of inputs, oldest first.
struct YieldSample {
  std::string county;
  std::string state;
  int year = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<YearBlock> years;
  ad::Tensor<float> soil;  // 6 depths x 10 properties (depth is the conv axis)
  ad::Tensor<float> practices;  // 1 x practice_count, standardized
  double target = 0.0;          // Bu/Acre
  float target_standardized = 0.0f;
};

/// Builds every sample whose `history` years and the year before the target
/// are present. Throws std::logic_error if a target-year yield leaks into
/// the inputs.
std::vector<YieldSample> build_samples(const YieldTable& table, const std::vector<std::string>& states,
                                       std::size_t history, const YieldScaler& scaler);

/// Throws std::logic_error unless every input yield comes from a year before
/// the target and the target's own value is not among them.
void check_no_target_leak(const YieldSample& sample, const YieldTable& table);

/// Five folds, each a random 7/2 split of the nine states.
struct SplitPlan {
  std::uint64_t seed = 0;
  struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> validation;
  };
  std::vector<Fold> folds;

  static SplitPlan make(std::vector<std::string> states, std::uint64_t seed, std::size_t folds = 5,
                        std::size_t validation_states = 2);
};

/// Root-mean-square error.
double rmse(std::span<const double> predictions, std::span<const double> truth);

enum class YieldDriver {
  /// yield follows mean precipitation over weeks 27..31 (July)
  kJulyPrecipitation,
  /// yield follows the mean precipitation over all 52 weeks
  kAnnualPrecipitation,
  /// yield follows growing-season mean reference evapotranspiration, which
  /// is not one of the six weather columns of the table
  kSeasonEt0,
};

struct YieldSynthSpec {
  std::size_t counties_per_state = 6;
  int first_year = 2000;
  int years = 12;
  double noise_sigma = 2.0;          // Bu/Acre
  double weather_noise = 0.1;        // noise of the weather generator
  double autoregression = 0.0;       // weight of last year's yield deviation
  double weather_effect = 6.0;       // Bu/Acre per standardized unit of the driver
  YieldDriver driver = YieldDriver::kJulyPrecipitation;
  /// Weather comes from the linear-latent generator when true, else from the
  /// physical one.
  bool latent_weather = true;
  std::size_t practice_count = 3;
};

/// Nine states of counties placed inside the synthetic pretraining region.
YieldTable generate_yield_synthetic(const YieldSynthSpec& spec, std::uint64_t seed);

}  // namespace wf::yield
