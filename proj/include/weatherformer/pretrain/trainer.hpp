#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "weatherformer/model/weatherformer.hpp"
#include "weatherformer/pretrain/dataset.hpp"
#include "weatherformer/pretrain/task.hpp"

namespace wf::pretrain {

enum class PretrainTask { kMaskedFeature, kMlm };

std::string to_string(PretrainTask task);
PretrainTask parse_task(const std::string& name);

struct PretrainConfig {
  int epochs = 75;
  std::size_t batch_size = 64;
  double base_lr = 5e-4;
  int warmup_epochs = 10;
  double decay = 0.99;
  std::uint64_t seed = 0;
  PretrainTask task = PretrainTask::kMaskedFeature;
  MlmConfig mlm;
  /// When false the masked-feature partition stays at its initial draw.
  bool rotate_targets = true;
  /// Training windows drawn per epoch after shuffling (0 = all).
  std::size_t samples_per_epoch = 0;
  /// Validation windows scored per epoch, always the same ones (0 = all).
  std::size_t validation_samples = 0;
  /// Worker threads for per-sample forward/backward. Results do not depend
  /// on this value.
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct PretrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  /// Batches in which each measurement was a target (masked-feature task).
  std::array<std::uint64_t, data::kMeasurementCount> target_batches{};
  std::uint64_t batches = 0;
};

/// Loss became non-finite; the message names the epoch and batch.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trains `model` (whose parameters live in `params`) and leaves the
/// best-validation parameters in place. With a non-empty run_dir, writes
/// config.json, loss.csv (rewritten each epoch), best.wfck and last.wfck.
PretrainResult run_pretraining(const model::WeatherFormer<float>& model, ad::ParameterSet<float>& params,
                               const PretrainDataset& dataset, const PretrainConfig& config,
                               const std::filesystem::path& run_dir = {},
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean validation loss of the current parameters on the fixed validation
/// task (the partition drawn from `seed`, or masks seeded per window).
double evaluate_pretraining(const model::WeatherFormer<float>& model, std::span<const Sample> samples,
                            const PretrainConfig& config);

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace wf::pretrain
