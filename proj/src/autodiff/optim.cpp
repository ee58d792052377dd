#include "weatherformer/autodiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wf::ad {

double LrSchedule::at(int epoch) const {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  if (epoch < warmup_epochs) {
    return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
  }
  return base_lr * std::pow(decay_factor, epoch - warmup_epochs);
}

double lr_at(const LrSchedule& schedule, int epoch) { return schedule.at(epoch); }

template <typename T>
AdamState<T>::AdamState(const ParameterSet<T>& params, double b1, double b2, double eps)
    : beta1(b1), beta2(b2), epsilon(eps) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& s = params[i].value.shape();
    first_moment.emplace_back(s.rows, s.cols);
    second_moment.emplace_back(s.rows, s.cols);
  }
}

template <typename T>
void adam_step(AdamState<T>& state, ParameterSet<T>& params, double lr) {
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, set has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!(state.first_moment[i].shape() == p.value.shape()) || !(p.grad.shape() == p.value.shape())) {
      throw ShapeError("adam shape mismatch for parameter " + p.name);
    }
    if (p.trainable && !p.grad.all_finite()) {
      throw NumericError("non-finite gradient for parameter " + p.name);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    auto w = p.value.values();
    const auto g = p.grad.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = lr * (mk / bc1) / (std::sqrt(vk / bc2) + state.epsilon);
      w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(AdamState<float>&, ParameterSet<float>&, double);
template void adam_step(AdamState<double>&, ParameterSet<double>&, double);

}  // namespace wf::ad
