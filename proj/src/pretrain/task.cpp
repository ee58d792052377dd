#include "weatherformer/pretrain/task.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wf::pretrain {

using data::kMeasurementCount;

std::vector<std::size_t> PretrainTaskState::targets() const {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < kMeasurementCount; ++m) {
    if (is_target[m]) out.push_back(m);
  }
  return out;
}

std::vector<std::size_t> PretrainTaskState::inputs() const {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < kMeasurementCount; ++m) {
    if (!is_target[m]) out.push_back(m);
  }
  return out;
}

model::FeatureMask PretrainTaskState::input_mask() const {
  model::FeatureMask mask{};
  for (std::size_t m = 0; m < kMeasurementCount; ++m) mask[m] = !is_target[m];
  return mask;
}

void PretrainTaskState::validate() const {
  const auto n = static_cast<std::size_t>(std::count(is_target.begin(), is_target.end(), true));
  if (n != kTargetCount) throw std::logic_error("task state has " + std::to_string(n) + " targets, expected 10");
}

PretrainTaskState init_task(std::uint64_t seed) {
  PretrainTaskState s;
  s.rng.seed(seed);
  std::array<std::size_t, kMeasurementCount> ids{};
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::shuffle(ids.begin(), ids.end(), s.rng);
  for (std::size_t k = 0; k < kTargetCount; ++k) s.is_target[ids[k]] = true;
  return s;
}

void swap_step(PretrainTaskState& state) {
  state.validate();
  const auto targets = state.targets();
  const auto inputs = state.inputs();
  std::uniform_int_distribution<std::size_t> pick_t(0, targets.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_i(0, inputs.size() - 1);
  const std::size_t t = targets[pick_t(state.rng)];
  const std::size_t i = inputs[pick_i(state.rng)];
  state.is_target[t] = false;
  state.is_target[i] = true;
  ++state.swaps;
}

template <typename T>
ad::Var<T> masked_feature_loss(ad::Var<T> output, const ad::Tensor<T>& truth,
                               const std::array<bool, kMeasurementCount>& is_target,
                               const model::PaddingMask& padding) {
  const auto& out = output.value();
  if (out.shape() != truth.shape() || out.cols() != kMeasurementCount || padding.size() != out.rows()) {
    throw ad::ShapeError("masked_feature_loss: output " + out.shape().str() + ", truth " + truth.shape().str());
  }
  if (std::none_of(is_target.begin(), is_target.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("masked_feature_loss: empty target set");
  }
  ad::Tensor<T> weights(out.rows(), out.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!padding[r]) continue;
    for (std::size_t m = 0; m < kMeasurementCount; ++m) weights(r, m) = is_target[m] ? T{1} : T{0};
  }
  return ad::weighted_mse(output, truth, weights);
}

void MlmConfig::validate() const {
  if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("mlm mask rate must be in (0, 1)");
}

MlmMask mlm_mask(const model::PaddingMask& padding, double rate, std::mt19937_64& rng) {
  MlmConfig{rate}.validate();
  MlmMask m{model::PaddingMask(padding.size(), false), 0};
  std::bernoulli_distribution pick(rate);
  for (std::size_t t = 0; t < padding.size(); ++t) {
    if (!padding[t]) continue;
    if (pick(rng)) {
      m.masked.set(t, true);
      ++m.count;
    }
  }
  return m;
}

MlmMask mlm_mask(const model::PaddingMask& padding, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return mlm_mask(padding, rate, rng);
}

template <typename T>
ad::Tensor<T> apply_mlm_mask(const ad::Tensor<T>& x, const MlmMask& mask) {
  if (mask.masked.size() != x.rows()) throw ad::ShapeError("mlm mask length differs from sequence length");
  ad::Tensor<T> out = x;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    if (!mask.masked[t]) continue;
    for (std::size_t m = 0; m < x.cols(); ++m) out(t, m) = T{0};
  }
  return out;
}

template <typename T>
ad::Var<T> mlm_loss(ad::Var<T> output, const ad::Tensor<T>& truth, const MlmMask& mask) {
  const auto& out = output.value();
  if (out.shape() != truth.shape() || mask.masked.size() != out.rows()) {
    throw ad::ShapeError("mlm_loss: output " + out.shape().str() + ", truth " + truth.shape().str());
  }
  if (mask.count == 0) throw std::invalid_argument("mlm_loss: no masked timesteps");
  ad::Tensor<T> weights(out.rows(), out.cols());
  for (std::size_t t = 0; t < out.rows(); ++t) {
    if (!mask.masked[t]) continue;
    for (std::size_t m = 0; m < out.cols(); ++m) weights(t, m) = T{1};
  }
  return ad::weighted_mse(output, truth, weights);
}

#define WF_INSTANTIATE(T)                                                                                \
  template ad::Var<T> masked_feature_loss(ad::Var<T>, const ad::Tensor<T>&,                              \
                                          const std::array<bool, kMeasurementCount>&,                    \
                                          const model::PaddingMask&);                                    \
  template ad::Tensor<T> apply_mlm_mask(const ad::Tensor<T>&, const MlmMask&);                           \
  template ad::Var<T> mlm_loss(ad::Var<T>, const ad::Tensor<T>&, const MlmMask&);

WF_INSTANTIATE(float)
WF_INSTANTIATE(double)

#undef WF_INSTANTIATE

}  // namespace wf::pretrain
