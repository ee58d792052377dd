#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/model/fit.hpp"
#include "weatherformer/yield/models.hpp"

namespace wf::yield {

/// Fine-tuning defaults: batch 64, lr 5e-4, 10 warm-up epochs, decay 0.95,
/// 40 epochs.
model::FitConfig default_yield_fit();

struct YieldRunConfig {
  YieldModelConfig model;
  model::FitConfig fit = default_yield_fit();
  nlohmann::json to_json() const;
};

struct FoldResult {
  std::size_t fold = 0;
  double rmse = 0.0;  // Bu/Acre, best validation epoch
  int best_epoch = -1;
  std::vector<model::FitEpoch> history;
  std::vector<double> predictions;
  std::vector<double> truth;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  double mean_rmse = 0.0;
};

/// Trains one variant on the fold's training states and scores RMSE on its
/// validation states. For WF variants, `pretrained` (when given) provides the
/// weather encoder weights, which are then fine-tuned end to end.
FoldResult train_fold(const YieldTable& table, const SplitPlan::Fold& fold, const YieldRunConfig& cfg,
                      std::uint64_t seed, const ad::Checkpoint* pretrained = nullptr);

CrossValidation evaluate_folds(const YieldTable& table, const SplitPlan& plan, const YieldRunConfig& cfg,
                               const ad::Checkpoint* pretrained = nullptr);

/// fold,rmse,best_epoch rows followed by a mean row.
void write_fold_csv(const std::filesystem::path& path, const CrossValidation& cv);

}  // namespace wf::yield
