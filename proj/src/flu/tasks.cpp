#include "weatherformer/flu/tasks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wf::flu {

void check_no_leak(const ForecastTask& task) {
  if (task.window == 0 || task.window > task.origin + 1) throw std::logic_error("forecast window starts before the series");
  if (task.horizon == 0) throw std::logic_error("forecast horizon is zero");
  if (task.input_end() > task.target_begin()) throw std::logic_error("forecast inputs overlap the target weeks");
}

std::vector<ForecastTask> rolling_tasks(std::size_t length, std::size_t window, std::size_t horizon,
                                        std::size_t first_origin, std::size_t last_origin) {
  if (window == 0 || horizon == 0) throw std::invalid_argument("window and horizon must be positive");
  if (length < window + horizon) {
    throw std::invalid_argument("series of " + std::to_string(length) + " weeks is shorter than window + horizon");
  }
  std::vector<ForecastTask> out;
  for (std::size_t o = std::max(first_origin, window - 1); o <= last_origin; ++o) {
    if (o + horizon >= length) break;
    ForecastTask t{o, window, horizon};
    check_no_leak(t);
    out.push_back(t);
  }
  return out;
}

std::vector<ForecastTask> tasks_for_year(const IliSeries& series, int year, std::size_t window, std::size_t horizon) {
  const std::size_t first = series.index_of({year, 1});
  if (first == series.size() || first == 0) {
    throw std::invalid_argument("series has no weeks before or in " + std::to_string(year));
  }
  const std::size_t last = first + static_cast<std::size_t>(weeks_in_year(year)) - 1;
  return rolling_tasks(series.size(), window, horizon, first - 1, last - 1);
}

std::vector<ForecastTask> tasks_before(const IliSeries& series, int year, std::size_t window, std::size_t horizon) {
  const std::size_t first = series.index_of({year, 1});
  if (first == series.size()) throw std::invalid_argument("series does not reach " + std::to_string(year));
  return rolling_tasks(first, window, horizon, 0, first - horizon - 1);
}

std::vector<FluSplit> sequential_splits(const IliSeries& full, std::size_t window, std::size_t horizon,
                                        int first_validation_year, int last_validation_year) {
  const IliSeries series = full.truncated_before(kExcludedFromYear);
  series.validate();
  if (series.weeks.front().week.year > first_validation_year - 6) {
    throw std::invalid_argument("at least six seasons are needed before the first validation year");
  }
  std::vector<FluSplit> out;
  for (int v = first_validation_year; v <= last_validation_year; ++v) {
    FluSplit s;
    s.validation_year = v;
    s.train_weeks = series.index_of({v, 1});
    s.train = tasks_before(series, v, window, horizon);
    s.validation = tasks_for_year(series, v, window, horizon);
    if (s.train.empty()) throw std::invalid_argument("no training tasks before " + std::to_string(v));
    if (s.validation.size() != static_cast<std::size_t>(weeks_in_year(v))) {
      throw std::invalid_argument("series does not cover the horizon after " + std::to_string(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

HorizonMae mae_at_horizons(std::span<const double> forecasts, std::span<const double> truth, std::size_t horizon) {
  if (horizon < 10) throw std::invalid_argument("mae_at_horizons needs a horizon of at least 10");
  if (forecasts.size() != truth.size() || forecasts.empty() || forecasts.size() % horizon != 0) {
    throw std::invalid_argument("forecast and truth must be equal-sized tasks x horizon matrices");
  }
  const std::size_t n = forecasts.size() / horizon;
  HorizonMae m;
  for (std::size_t i = 0; i < n; ++i) {
    m.week1 += std::abs(forecasts[i * horizon] - truth[i * horizon]);
    m.week5 += std::abs(forecasts[i * horizon + 4] - truth[i * horizon + 4]);
    m.week10 += std::abs(forecasts[i * horizon + 9] - truth[i * horizon + 9]);
  }
  m.week1 /= static_cast<double>(n);
  m.week5 /= static_cast<double>(n);
  m.week10 /= static_cast<double>(n);
  return m;
}

HorizonMae average(std::span<const HorizonMae> per_year) {
  if (per_year.empty()) throw std::invalid_argument("no per-year MAE values to average");
  HorizonMae m;
  for (const auto& y : per_year) {
    m.week1 += y.week1;
    m.week5 += y.week5;
    m.week10 += y.week10;
  }
  const double n = static_cast<double>(per_year.size());
  return {m.week1 / n, m.week5 / n, m.week10 / n};
}

std::vector<double> task_truth(const IliSeries& series, std::span<const ForecastTask> tasks) {
  std::vector<double> out;
  for (const auto& t : tasks) {
    if (t.target_end() > series.size()) throw std::out_of_range("task target beyond the series");
    for (std::size_t k = t.target_begin(); k < t.target_end(); ++k) out.push_back(series.weeks[k].ili_percent);
  }
  return out;
}

}  // namespace wf::flu
