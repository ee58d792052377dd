#include "weatherformer/flu/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "weatherformer/data/synthetic.hpp"

namespace wf::flu {

namespace {

using std::chrono::sys_days;

// Sunday starting week 1 of `year`.
sys_days year_start(int year) {
  const sys_days jan4{data::make_date(year, 1, 4)};
  const auto wd = std::chrono::weekday{jan4}.c_encoding();  // Sunday = 0
  return jan4 - std::chrono::days{wd};
}

double parse_cell(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw std::runtime_error("ili csv line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
}

}  // namespace

int weeks_in_year(int year) {
  return static_cast<int>((year_start(year + 1) - year_start(year)).count() / 7);
}

Epiweek Epiweek::from_code(int code) {
  Epiweek w{code / 100, code % 100};
  w.validate();
  return w;
}

void Epiweek::validate() const {
  if (year < 1900 || year > 2200) throw std::invalid_argument("epiweek year out of range: " + std::to_string(year));
  if (week < 1 || week > weeks_in_year(year)) {
    throw std::invalid_argument("epiweek " + std::to_string(code()) + " does not exist");
  }
}

data::Date Epiweek::start() const {
  return data::Date{year_start(year) + std::chrono::days{7 * (week - 1)}};
}

Epiweek Epiweek::next() const {
  if (week < weeks_in_year(year)) return {year, week + 1};
  return {year + 1, 1};
}

Epiweek epiweek_of(const data::Date& d) {
  const sys_days day{d};
  int y = static_cast<int>(d.year());
  if (day < year_start(y)) --y;
  else if (day >= year_start(y + 1)) ++y;
  return {y, static_cast<int>((day - year_start(y)).count() / 7) + 1};
}

void IliSeries::validate() const {
  if (weeks.empty()) throw std::invalid_argument("ili series is empty");
  for (std::size_t i = 0; i < weeks.size(); ++i) {
    weeks[i].week.validate();
    if (i > 0 && !(weeks[i].week == weeks[i - 1].week.next())) {
      throw std::invalid_argument("ili series skips from " + std::to_string(weeks[i - 1].week.code()) + " to " +
                                  std::to_string(weeks[i].week.code()));
    }
    const double v = weeks[i].ili_percent;
    if (!(v >= 0.0 && v <= 100.0)) {
      throw std::invalid_argument("ili percent outside [0, 100] at " + std::to_string(weeks[i].week.code()));
    }
    if (!(weeks[i].patients >= 0.0)) throw std::invalid_argument("negative patient count");
  }
  if (!weather.empty() && weather.size() != weeks.size()) {
    throw std::invalid_argument("weekly weather is not aligned with the ili weeks");
  }
}

std::size_t IliSeries::index_of(const Epiweek& w) const {
  if (weeks.empty()) return 0;
  const auto first = weeks.front().week;
  if (w < first) return weeks.size();
  // series is consecutive, so the offset is the number of weeks in between
  std::size_t k = 0;
  for (int y = first.year; y < w.year; ++y) k += static_cast<std::size_t>(weeks_in_year(y));
  k = k + static_cast<std::size_t>(w.week) - static_cast<std::size_t>(first.week);
  return k < weeks.size() ? k : weeks.size();
}

IliSeries IliSeries::truncated_before(int year) const {
  IliSeries out = *this;
  std::size_t n = 0;
  while (n < weeks.size() && weeks[n].week.year < year) ++n;
  out.weeks.resize(n);
  if (!weather.empty()) out.weather.resize(n);
  return out;
}

IliSeries read_ili_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "epiweek,ili_percent,num_patients") {
    throw std::runtime_error(path.string() + ": expected header epiweek,ili_percent,num_patients");
  }
  IliSeries s;
  s.city = path.stem().string();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
      throw std::runtime_error("ili csv line " + std::to_string(line_no) + ": expected 3 fields");
    }
    IliWeek w;
    w.week = Epiweek::from_code(static_cast<int>(parse_cell(a, line_no)));
    w.ili_percent = parse_cell(b, line_no);
    w.patients = parse_cell(c, line_no);
    s.weeks.push_back(w);
  }
  s.validate();
  return s;
}

void write_ili_csv(const std::filesystem::path& path, const IliSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "epiweek,ili_percent,num_patients\n";
  for (const auto& w : series.weeks) out << w.week.code() << ',' << w.ili_percent << ',' << w.patients << '\n';
}

std::vector<std::array<float, data::kMeasurementCount>> weekly_weather(
    const std::vector<data::WeatherSeries>& daily_cells, const std::vector<Epiweek>& weeks) {
  if (daily_cells.empty()) throw std::invalid_argument("weekly_weather needs at least one grid cell");
  std::vector<std::array<float, data::kMeasurementCount>> out(weeks.size());
  for (std::size_t i = 0; i < weeks.size(); ++i) {
    std::array<double, data::kMeasurementCount> acc{};
    const auto first_day = data::day_index(weeks[i].start());
    for (const auto& cell : daily_cells) {
      if (cell.granularity_days != 1 || cell.standardized) {
        throw std::invalid_argument("weekly_weather expects daily series in natural units");
      }
      const auto offset = first_day - data::day_index(cell.start_date);
      if (offset < 0 || static_cast<std::size_t>(offset) + 7 > cell.valid_len) {
        throw std::invalid_argument("daily weather does not cover epiweek " + std::to_string(weeks[i].code()));
      }
      for (std::size_t d = 0; d < 7; ++d) {
        const auto row = cell.row(static_cast<std::size_t>(offset) + d);
        for (std::size_t m = 0; m < data::kMeasurementCount; ++m) acc[m] += row[m];
      }
    }
    const double n = 7.0 * static_cast<double>(daily_cells.size());
    for (std::size_t m = 0; m < data::kMeasurementCount; ++m) out[i][m] = static_cast<float>(acc[m] / n);
  }
  return out;
}

IliSeries generate_ili_synthetic(const IliSynthSpec& spec, std::uint64_t seed) {
  if (spec.last_year < spec.first_year) throw std::invalid_argument("ili synth: last_year before first_year");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;

  IliSeries s;
  s.city = "synthetic";
  s.latitude = spec.latitude;
  s.longitude = spec.longitude;
  for (Epiweek w{spec.first_year, 1}; w.year <= spec.last_year; w = w.next()) s.weeks.push_back({w, 0.0, 0.0});

  const auto start = s.weeks.front().week.start();
  const std::size_t days = 7 * s.weeks.size();
  std::mt19937_64 wrng(rng());
  const auto daily = data::synthesize_point(data::SynthKind::kPhysical, {spec.latitude, spec.longitude}, start, days,
                                            1.0, wrng);
  std::vector<Epiweek> ids;
  for (const auto& w : s.weeks) ids.push_back(w.week);
  s.weather = weekly_weather({daily}, ids);

  double mean = 0.0, sq = 0.0;
  for (const auto& row : s.weather) mean += row[data::kT2M];
  mean /= static_cast<double>(s.weather.size());
  for (const auto& row : s.weather) sq += (row[data::kT2M] - mean) * (row[data::kT2M] - mean);
  const double sd = std::max(std::sqrt(sq / static_cast<double>(s.weather.size())), 1e-9);

  // log incidence integrates the temperature anomaly of three weeks earlier,
  // so recent temperatures carry information about the next few weeks
  constexpr std::size_t kLag = 3;
  double state = 0.0;
  for (std::size_t t = 0; t < s.weeks.size(); ++t) {
    const double cold = t >= kLag ? -(s.weather[t - kLag][data::kT2M] - mean) / sd : 0.0;
    state = 0.85 * state + 0.3 * spec.weather_effect * cold + spec.noise_sigma * z(rng);
    s.weeks[t].ili_percent = std::clamp(1.6 * std::exp(0.9 * state), 0.0, 100.0);
    const double growth = 1.0 + 0.03 * static_cast<double>(s.weeks[t].week.year - spec.first_year);
    s.weeks[t].patients = std::round(20000.0 * growth * (1.0 + 0.05 * z(rng)));
  }
  s.validate();
  return s;
}

}  // namespace wf::flu
