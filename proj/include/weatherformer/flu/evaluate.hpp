#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/flu/arima.hpp"
#include "weatherformer/flu/models.hpp"
#include "weatherformer/model/fit.hpp"

namespace wf::flu {

/// MSE loss, lr 9e-4, 30 epochs, 5 warm-up epochs, decay 0.95.
model::FitConfig default_flu_fit();

struct FluRunConfig {
  FluModelConfig model;
  model::FitConfig fit = default_flu_fit();
  nlohmann::json to_json() const;
};

struct FluSplitResult {
  int validation_year = 0;
  HorizonMae mae;
  /// Mean validation loss at the best epoch (transformers only).
  double validation_loss = 0.0;
  int best_epoch = -1;
  std::vector<model::FitEpoch> history;
  std::vector<ForecastTask> tasks;
  std::vector<double> forecasts;  // tasks x horizon
  std::vector<double> truth;
};

struct FluEvaluation {
  std::string method;
  std::vector<FluSplitResult> splits;
  /// Per-year MAE averaged over the validation years.
  HorizonMae mean;
};

FluSplitResult train_flu_split(const IliSeries& series, const FluSplit& split, const FluRunConfig& cfg,
                               std::uint64_t seed, const ad::Checkpoint* pretrained = nullptr);
/// Fitted once on the split's training weeks; each task forecasts from all
/// weeks up to its origin.
FluSplitResult arima_split(const IliSeries& series, const FluSplit& split, const ArimaConfig& cfg,
                           std::size_t horizon = kHorizon);
FluSplitResult linreg_split(const IliSeries& series, const FluSplit& split, std::size_t lags = 4);

FluEvaluation summarize(std::string method, std::vector<FluSplitResult> splits);

/// Window with the lowest mean of the three horizon MAEs over all splits.
struct WindowSearch {
  std::size_t best_window = 0;
  std::vector<std::pair<std::size_t, double>> scores;
};
WindowSearch select_window(const IliSeries& series, const FluRunConfig& cfg, std::uint64_t seed,
                           const ad::Checkpoint* pretrained = nullptr,
                           std::span<const std::size_t> candidates = kWindowChoices);

/// Per-task rows (split, origin week, absolute errors at +1/+5/+10) followed
/// by per-year pooled rows and the averaged row.
void write_flu_csv(const std::filesystem::path& path, const IliSeries& series, const FluEvaluation& eval);

}  // namespace wf::flu
