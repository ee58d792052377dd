#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "weatherformer/autodiff/optim.hpp"
#include "weatherformer/autodiff/parameter.hpp"
#include "weatherformer/autodiff/tape.hpp"
#include "weatherformer/util/parallel.hpp"

namespace wf::model {

/// Minibatch Adam with the warm-up/decay schedule, used by the fine-tuning
/// tasks. Lower validation metric is better.
struct FitConfig {
  int epochs = 40;
  std::size_t batch_size = 64;
  double base_lr = 5e-4;
  int warmup_epochs = 10;
  double decay = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (epochs <= 0 || batch_size == 0 || !(base_lr > 0.0) || warmup_epochs <= 0 || !(decay > 0.0) || threads <= 0) {
      throw std::invalid_argument("fit config values must be positive");
    }
  }
  nlohmann::json to_json() const {
    return {{"epochs", epochs},         {"batch_size", batch_size}, {"base_lr", base_lr},
            {"warmup_epochs", warmup_epochs}, {"decay", decay},     {"seed", seed}};
  }
  static FitConfig from_json(const nlohmann::json& j, FitConfig c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.decay = j.value("decay", c.decay);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  }
};

struct FitEpoch {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double validation = 0.0;
};

struct FitResult {
  std::vector<FitEpoch> history;
  int best_epoch = -1;
  double best_validation = 0.0;
};

/// `loss(tape, i, dropout_rng)` builds the loss of training example i.
/// `validate()` scores the current parameters. The best-validation parameters
/// are restored before returning. Gradients are summed in example order, so
/// the thread count does not change results.
template <typename T>
FitResult fit(ad::ParameterSet<T>& params, std::size_t n_train,
              const std::function<ad::Var<T>(ad::Tape<T>&, std::size_t, std::mt19937_64&)>& loss,
              const std::function<double()>& validate, const FitConfig& cfg) {
  cfg.validate();
  if (n_train == 0) throw std::invalid_argument("fit: no training examples");
  const ad::LrSchedule schedule{cfg.base_lr, cfg.warmup_epochs, cfg.decay};
  ad::AdamState<T> adam(params);
  std::mt19937_64 order_rng(cfg.seed);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  FitResult result;
  std::vector<ad::Tensor<T>> best;
  const auto group = static_cast<std::size_t>(cfg.threads);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule.at(epoch);
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < n_train; b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(n_train, b0 + cfg.batch_size);
      params.zero_grad();
      std::vector<double> values(b1 - b0);
      for (std::size_t g0 = b0; g0 < b1; g0 += group) {
        const std::size_t g1 = std::min(b1, g0 + group);
        std::vector<std::unique_ptr<ad::Tape<T>>> tapes(g1 - g0);
        util::parallel_for(g1 - g0, cfg.threads, [&](std::size_t k) {
          tapes[k] = std::make_unique<ad::Tape<T>>();
          std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(epoch),
                            static_cast<std::uint32_t>(g0 + k)};
          std::mt19937_64 drop(seq);
          auto l = loss(*tapes[k], order[g0 + k], drop);
          values[g0 + k - b0] = static_cast<double>(l.value()[0]);
          tapes[k]->backward(l, ad::GradSink::kDeferred);
        });
        for (auto& t : tapes) t->flush_parameter_grads();
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw ad::NumericError("fit: non-finite loss in epoch " + std::to_string(epoch));
        total += v;
      }
      const T inv = T(1) / static_cast<T>(b1 - b0);
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (auto& g : params[p].grad.values()) g *= inv;
      }
      ad::adam_step(adam, params, lr);
    }
    FitEpoch rec{epoch, lr, total / static_cast<double>(n_train), validate()};
    result.history.push_back(rec);
    if (result.best_epoch < 0 || rec.validation < result.best_validation) {
      result.best_epoch = epoch;
      result.best_validation = rec.validation;
      best.clear();
      for (std::size_t p = 0; p < params.size(); ++p) best.push_back(params[p].value);
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) params[p].value = best[p];
  return result;
}

}  // namespace wf::model
