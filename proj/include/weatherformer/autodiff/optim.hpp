#pragma once

#include <cstdint>
#include <vector>

#include "weatherformer/autodiff/parameter.hpp"

namespace wf::ad {

/// Linear warm-up followed by per-epoch exponential decay.
struct LrSchedule {
  double base_lr = 5e-4;
  int warmup_epochs = 10;
  double decay_factor = 0.99;

  /// base*(epoch+1)/warmup during warm-up, base*decay^(epoch-warmup) after.
  double at(int epoch) const;
};

double lr_at(const LrSchedule& schedule, int epoch);

/// First/second moment accumulators for every parameter of one set.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const ParameterSet<T>& params, double b1 = 0.9, double b2 = 0.999,
                     double eps = 1e-8);
};

/// One bias-corrected Adam update using the gradients stored in `params`.
/// Non-trainable parameters are skipped. Throws ShapeError if `state` was
/// built for a different parameter layout and NumericError on a non-finite
/// gradient.
template <typename T>
void adam_step(AdamState<T>& state, ParameterSet<T>& params, double lr);

}  // namespace wf::ad
