#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "weatherformer/data/series.hpp"

namespace wf::data {

class PowerError : public std::runtime_error {
 public:
  enum class Kind { kUnreachable, kHttpStatus, kSchema, kPartialData };
  PowerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PowerClientConfig {
  std::string endpoint = "https://power.larc.nasa.gov/api/temporal/daily/point";
  std::string community = "AG";
  bool offline = false;
  int timeout_seconds = 60;
  /// The public API accepts at most this many parameters per request.
  std::size_t max_parameters_per_request = 20;
};

/// Applies WF_POWER_ENDPOINT from the environment when it is set.
PowerClientConfig apply_environment(PowerClientConfig cfg);

/// Parses one daily point response. `expected` lists the measurement indices
/// (all < 28) that were requested; the result is a days x 31 series holding
/// those columns, NaN for fill values and NaN for columns not requested.
/// Unknown parameters, missing parameters and malformed bodies are schema
/// errors; missing dates are partial-data errors.
WeatherSeries parse_power_response(std::string_view body, std::span<const std::size_t> expected,
                                   const Coordinate& at, const Date& start, const Date& end);

class PowerClient {
 public:
  explicit PowerClient(PowerClientConfig cfg) : cfg_(std::move(cfg)) {}

  const PowerClientConfig& config() const { return cfg_; }

  /// Path and query string of one request, relative to the endpoint host.
  std::string request_target(std::span<const std::size_t> params, const Coordinate& at, const Date& start,
                             const Date& end) const;

  /// All 28 downloadable measurements of one point as a daily series; RH is
  /// converted from percent and the derived columns are filled in.
  WeatherSeries fetch_point(const Coordinate& at, const Date& start, const Date& end) const;

 private:
  PowerClientConfig cfg_;
};

/// Downloads every grid point of a tile and splits it into yearly series.
/// In offline mode a deterministic synthetic tile of the same shape is returned.
GridTile fetch_tile(const PowerClient& client, const Bounds& bounds, int first_year, int last_year,
                    std::size_t points_per_tile = 0);

}  // namespace wf::data
