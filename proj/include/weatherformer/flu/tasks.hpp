#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "weatherformer/flu/series.hpp"

namespace wf::flu {

inline constexpr std::size_t kHorizon = 10;
/// Input window lengths tried during window selection.
inline constexpr std::array<std::size_t, 7> kWindowChoices = {105, 110, 115, 120, 125, 130, 135};
/// Weeks from this year on are never used.
inline constexpr int kExcludedFromYear = 2021;

/// One forecast: inputs are weeks [origin + 1 - window, origin], targets are
/// weeks origin + 1 .. origin + horizon.
struct ForecastTask {
  std::size_t origin = 0;
  std::size_t window = 0;
  std::size_t horizon = kHorizon;

  std::size_t input_begin() const { return origin + 1 - window; }
  std::size_t input_end() const { return origin + 1; }
  std::size_t target_begin() const { return origin + 1; }
  std::size_t target_end() const { return origin + 1 + horizon; }
};

/// Throws std::logic_error if any input week is at or after the first target.
void check_no_leak(const ForecastTask& task);

/// Tasks for every origin in [first_origin, last_origin] with a full input
/// window and a full horizon inside a series of `length` weeks.
std::vector<ForecastTask> rolling_tasks(std::size_t length, std::size_t window, std::size_t horizon,
                                        std::size_t first_origin, std::size_t last_origin);

/// Tasks whose first target week lies in `year` (one per week of that year).
std::vector<ForecastTask> tasks_for_year(const IliSeries& series, int year, std::size_t window,
                                         std::size_t horizon = kHorizon);

/// Every task whose targets all fall before the first week of `year`.
std::vector<ForecastTask> tasks_before(const IliSeries& series, int year, std::size_t window,
                                       std::size_t horizon = kHorizon);

/// Expanding-window split: train on all seasons before the validation year.
struct FluSplit {
  int validation_year = 2016;
  std::vector<ForecastTask> train;
  std::vector<ForecastTask> validation;
  /// Weeks [0, train_weeks) may be used for fitting.
  std::size_t train_weeks = 0;
};

/// Four splits validating 2016, 2017, 2018 and 2019. Weeks from 2021 on are
/// dropped first; at least six training seasons must precede 2016.
std::vector<FluSplit> sequential_splits(const IliSeries& series, std::size_t window, std::size_t horizon = kHorizon,
                                        int first_validation_year = 2016, int last_validation_year = 2019);

struct HorizonMae {
  double week1 = 0.0;
  double week5 = 0.0;
  double week10 = 0.0;
};

/// forecasts and truth are tasks x horizon (row-major); horizon >= 10.
HorizonMae mae_at_horizons(std::span<const double> forecasts, std::span<const double> truth,
                           std::size_t horizon = kHorizon);
/// Plain average of per-year MAE values.
HorizonMae average(std::span<const HorizonMae> per_year);

/// Truth matrix (tasks x horizon) of ILI values.
std::vector<double> task_truth(const IliSeries& series, std::span<const ForecastTask> tasks);

}  // namespace wf::flu
