#include "weatherformer/data/power_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>

#include "httplib.h"
#include "json.hpp"
#include "weatherformer/data/meteo.hpp"
#include "weatherformer/data/synthetic.hpp"

namespace wf::data {

using namespace std::chrono;
using nlohmann::json;

namespace {

std::string yyyymmdd(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

// Columns the API reports in percent while the catalog stores fractions.
bool is_percent_column(std::size_t m) { return m == kRH2M || m == kCloudAmount; }

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

PowerClientConfig apply_environment(PowerClientConfig cfg) {
  if (const char* env = std::getenv("WF_POWER_ENDPOINT"); env != nullptr && *env != '\0') cfg.endpoint = env;
  return cfg;
}

WeatherSeries parse_power_response(std::string_view body, std::span<const std::size_t> expected,
                                   const Coordinate& at, const Date& start, const Date& end) {
  const auto first = sys_days{start};
  const auto last = sys_days{end};
  if (last < first) throw std::invalid_argument("parse_power_response: end before start");
  const auto n_days = static_cast<std::size_t>((last - first).count() + 1);

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw PowerError(PowerError::Kind::kSchema, std::string("malformed JSON body: ") + e.what());
  }
  const json* params = nullptr;
  double fill = -999.0;
  try {
    params = &doc.at("properties").at("parameter");
    if (doc.contains("header") && doc["header"].contains("fill_value")) fill = doc["header"]["fill_value"].get<double>();
  } catch (const json::exception& e) {
    throw PowerError(PowerError::Kind::kSchema, std::string("response lacks properties.parameter: ") + e.what());
  }
  if (!params->is_object()) throw PowerError(PowerError::Kind::kSchema, "properties.parameter is not an object");

  for (const auto& [key, _] : params->items()) {
    const auto idx = index_of(key);
    if (!idx || std::find(expected.begin(), expected.end(), *idx) == expected.end()) {
      throw PowerError(PowerError::Kind::kSchema, "unexpected parameter in response: " + key);
    }
  }

  WeatherSeries s = WeatherSeries::zeros(n_days, 1);
  std::fill(s.values.begin(), s.values.end(), std::numeric_limits<float>::quiet_NaN());
  s.latitude = at.latitude;
  s.longitude = at.longitude;
  s.start_date = start;
  for (std::size_t m : expected) {
    if (m >= kDownloadedCount) throw std::invalid_argument("only the 28 downloadable measurements can be requested");
    const std::string name(catalog()[m].symbol);
    if (!params->contains(name)) throw PowerError(PowerError::Kind::kSchema, "parameter missing from response: " + name);
    const json& series = (*params)[name];
    if (!series.is_object()) throw PowerError(PowerError::Kind::kSchema, "parameter " + name + " is not a date map");
    std::size_t seen = 0;
    for (const auto& [date_key, value] : series.items()) {
      int y = 0;
      unsigned mo = 0, d = 0;
      if (date_key.size() != 8 || std::sscanf(date_key.c_str(), "%4d%2u%2u", &y, &mo, &d) != 3) {
        throw PowerError(PowerError::Kind::kSchema, "bad date key '" + date_key + "' in " + name);
      }
      const Date date{year{y}, month{mo}, day{d}};
      if (!date.ok() || sys_days{date} < first || sys_days{date} > last) {
        throw PowerError(PowerError::Kind::kSchema, "date " + date_key + " outside requested range in " + name);
      }
      if (!value.is_number()) throw PowerError(PowerError::Kind::kSchema, "non-numeric value in " + name);
      const double v = value.get<double>();
      const auto row = static_cast<std::size_t>((sys_days{date} - first).count());
      s.at(row, m) = v == fill ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(v);
      ++seen;
    }
    if (seen != n_days) {
      throw PowerError(PowerError::Kind::kPartialData, "parameter " + name + " has " + std::to_string(seen) + " of " +
                                                           std::to_string(n_days) + " requested days");
    }
  }
  return s;
}

std::string PowerClient::request_target(std::span<const std::size_t> params, const Coordinate& at, const Date& start,
                                        const Date& end) const {
  std::string names;
  for (std::size_t m : params) {
    if (!names.empty()) names += ',';
    names += catalog()[m].symbol;
  }
  char coords[96];
  std::snprintf(coords, sizeof coords, "&longitude=%.4f&latitude=%.4f", at.longitude, at.latitude);
  return split_endpoint(cfg_.endpoint).path + "?parameters=" + names + "&community=" + cfg_.community + coords +
         "&start=" + yyyymmdd(start) + "&end=" + yyyymmdd(end) + "&format=JSON";
}

WeatherSeries PowerClient::fetch_point(const Coordinate& at, const Date& start, const Date& end) const {
  if (cfg_.offline) throw std::logic_error("fetch_point called in offline mode");
  const auto ep = split_endpoint(cfg_.endpoint);
  httplib::Client cli(ep.scheme_host_port);
  cli.set_connection_timeout(cfg_.timeout_seconds, 0);
  cli.set_read_timeout(cfg_.timeout_seconds, 0);

  std::vector<std::size_t> all(kDownloadedCount);
  std::iota(all.begin(), all.end(), 0);
  WeatherSeries merged;
  for (std::size_t off = 0; off < all.size(); off += cfg_.max_parameters_per_request) {
    const std::span<const std::size_t> chunk(all.data() + off,
                                             std::min(cfg_.max_parameters_per_request, all.size() - off));
    auto res = cli.Get(request_target(chunk, at, start, end));
    if (!res) {
      throw PowerError(PowerError::Kind::kUnreachable,
                       "endpoint " + cfg_.endpoint + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw PowerError(PowerError::Kind::kHttpStatus, "endpoint returned HTTP " + std::to_string(res->status));
    }
    auto part = parse_power_response(res->body, chunk, at, start, end);
    if (off == 0) {
      merged = std::move(part);
      continue;
    }
    for (std::size_t r = 0; r < merged.rows; ++r) {
      for (std::size_t m : chunk) merged.at(r, m) = part.at(r, m);
    }
  }
  for (std::size_t r = 0; r < merged.rows; ++r) {
    for (std::size_t m = 0; m < kDownloadedCount; ++m) {
      if (is_percent_column(m) && !std::isnan(merged.at(r, m))) {
        merged.at(r, m) = std::clamp(merged.at(r, m) / 100.0f, 0.0f, 1.0f);
      }
    }
    derive_row(merged.row(r));
  }
  return merged;
}

GridTile fetch_tile(const PowerClient& client, const Bounds& bounds, int first_year, int last_year,
                    std::size_t points_per_tile) {
  if (last_year < first_year) throw std::invalid_argument("fetch_tile: empty year range");
  GridTile t;
  t.bounds = bounds;
  t.first_year = first_year;
  t.last_year = last_year;
  auto grid = grid_coordinates(bounds);
  if (points_per_tile > 0 && points_per_tile < grid.size()) {
    std::vector<Coordinate> subset;
    for (std::size_t i = 0; i < points_per_tile; ++i) subset.push_back(grid[i * grid.size() / points_per_tile]);
    grid = std::move(subset);
  }
  t.coordinates = grid;
  const Date start = make_date(first_year, 1, 1);
  const Date end = make_date(last_year, 12, 31);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    WeatherSeries all;
    if (client.config().offline) {
      std::mt19937_64 rng(0x0ff11e5eedULL + c);
      const auto n = static_cast<std::size_t>((sys_days{end} - sys_days{start}).count() + 1);
      all = synthesize_point(SynthKind::kPhysical, grid[c], start, n, 0.1, rng);
    } else {
      all = client.fetch_point(grid[c], start, end);
    }
    std::vector<WeatherSeries> per_year;
    std::size_t offset = 0;
    for (int y = first_year; y <= last_year; ++y) {
      const auto n = static_cast<std::size_t>(days_in_year(y));
      WeatherSeries s = WeatherSeries::zeros(n, 1);
      s.latitude = all.latitude;
      s.longitude = all.longitude;
      s.start_date = make_date(y, 1, 1);
      std::copy_n(all.values.begin() + static_cast<std::ptrdiff_t>(offset * kMeasurementCount), n * kMeasurementCount,
                  s.values.begin());
      per_year.push_back(std::move(s));
      offset += n;
    }
    t.series.push_back(std::move(per_year));
  }
  return t;
}

}  // namespace wf::data
