#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "weatherformer/autodiff/ops.hpp"
#include "weatherformer/model/encoding.hpp"

namespace wf::pretrain {

inline constexpr std::size_t kTargetCount = 10;

/// Which measurements are currently predicted (targets) and which are fed to
/// the model (inputs). The swap RNG lives here, apart from any data RNG.
struct PretrainTaskState {
  std::array<bool, data::kMeasurementCount> is_target{};
  std::mt19937_64 rng;
  std::uint64_t swaps = 0;

  std::vector<std::size_t> targets() const;
  std::vector<std::size_t> inputs() const;
  /// Feature mask for the model: true on input columns only.
  model::FeatureMask input_mask() const;
  /// Throws std::logic_error unless exactly 10 ids are targets.
  void validate() const;
};

PretrainTaskState init_task(std::uint64_t seed);

/// Exchanges one uniformly chosen target with one uniformly chosen input.
void swap_step(PretrainTaskState& state);

/// MSE over real timesteps and target columns only.
template <typename T>
ad::Var<T> masked_feature_loss(ad::Var<T> output, const ad::Tensor<T>& truth,
                               const std::array<bool, data::kMeasurementCount>& is_target,
                               const model::PaddingMask& padding);

struct MlmConfig {
  double rate = 0.15;
  void validate() const;
};

/// Timesteps selected for masking; only real timesteps can be selected.
struct MlmMask {
  model::PaddingMask masked;
  std::size_t count = 0;
};

MlmMask mlm_mask(const model::PaddingMask& padding, double rate, std::mt19937_64& rng);
MlmMask mlm_mask(const model::PaddingMask& padding, double rate, std::uint64_t seed);

/// Copy of x with the masked rows zeroed across all columns.
template <typename T>
ad::Tensor<T> apply_mlm_mask(const ad::Tensor<T>& x, const MlmMask& mask);

/// MSE over masked rows and all columns. The mask must select at least one row.
template <typename T>
ad::Var<T> mlm_loss(ad::Var<T> output, const ad::Tensor<T>& truth, const MlmMask& mask);

}  // namespace wf::pretrain
