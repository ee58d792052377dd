#include "weatherformer/pretrain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>

#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/autodiff/optim.hpp"
#include "weatherformer/util/parallel.hpp"

namespace wf::pretrain {

namespace {

constexpr std::uint64_t kValidationTaskSalt = 0x7a11da7e0f1e1dULL;

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Forward pass and loss for one window. Returns nullopt-equivalent (no loss)
// when an MLM mask selects nothing.
struct SampleLoss {
  bool used = false;
  double value = 0.0;
};

SampleLoss sample_loss(ad::Tape<float>& tape, const model::WeatherFormer<float>& model, const Sample& s,
                       const PretrainConfig& cfg, const std::array<bool, data::kMeasurementCount>& is_target,
                       std::uint64_t mask_seed, nn::Rng* dropout_rng, bool backward) {
  if (cfg.task == PretrainTask::kMaskedFeature) {
    model::FeatureMask inputs{};
    for (std::size_t m = 0; m < data::kMeasurementCount; ++m) inputs[m] = !is_target[m];
    auto out = model.forward(tape, s.x, s.ctx, inputs, s.padding, dropout_rng);
    auto loss = masked_feature_loss(out, s.x, is_target, s.padding);
    const double v = loss.value()[0];
    if (backward) tape.backward(loss, ad::GradSink::kDeferred);
    return {true, v};
  }
  const auto mask = mlm_mask(s.padding, cfg.mlm.rate, mask_seed);
  if (mask.count == 0) return {};
  auto out = model.forward(tape, apply_mlm_mask(s.x, mask), s.ctx, model::all_features(), s.padding, dropout_rng);
  auto loss = mlm_loss(out, s.x, mask);
  const double v = loss.value()[0];
  if (backward) tape.backward(loss, ad::GradSink::kDeferred);
  return {true, v};
}

std::vector<std::size_t> validation_subset(std::size_t total, const PretrainConfig& cfg) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cfg.validation_samples > 0 && cfg.validation_samples < total) {
    std::mt19937_64 rng(mix(cfg.seed, 0xfa11, 0));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.validation_samples);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

nlohmann::json run_snapshot(const model::WeatherFormer<float>& model, const PretrainDataset& ds,
                            const PretrainConfig& cfg) {
  return {{"model", model.config().to_json()}, {"pretrain", cfg.to_json()}, {"stats", ds.stats.to_json()}};
}

}  // namespace

std::string to_string(PretrainTask task) { return task == PretrainTask::kMlm ? "mlm" : "masked-feature"; }

PretrainTask parse_task(const std::string& name) {
  if (name == "masked-feature") return PretrainTask::kMaskedFeature;
  if (name == "mlm") return PretrainTask::kMlm;
  throw std::invalid_argument("unknown pretraining task '" + name + "' (masked-feature or mlm)");
}

void PretrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
  if (warmup_epochs <= 0) throw std::invalid_argument("warmup must be positive");
  if (!(decay > 0.0)) throw std::invalid_argument("decay must be positive");
  if (threads <= 0) throw std::invalid_argument("threads must be positive");
  mlm.validate();
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"base_lr", base_lr},
          {"warmup_epochs", warmup_epochs},
          {"decay", decay},
          {"seed", seed},
          {"task", to_string(task)},
          {"mlm_rate", mlm.rate},
          {"rotate_targets", rotate_targets},
          {"samples_per_epoch", samples_per_epoch},
          {"validation_samples", validation_samples}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.decay = j.value("decay", c.decay);
  c.seed = j.value("seed", c.seed);
  c.task = parse_task(j.value("task", to_string(c.task)));
  c.mlm.rate = j.value("mlm_rate", c.mlm.rate);
  c.rotate_targets = j.value("rotate_targets", c.rotate_targets);
  c.samples_per_epoch = j.value("samples_per_epoch", c.samples_per_epoch);
  c.validation_samples = j.value("validation_samples", c.validation_samples);
  c.validate();
  return c;
}

double evaluate_pretraining(const model::WeatherFormer<float>& model, std::span<const Sample> samples,
                            const PretrainConfig& cfg) {
  const auto fixed = init_task(cfg.seed ^ kValidationTaskSalt);
  const auto idx = validation_subset(samples.size(), cfg);
  std::vector<SampleLoss> losses(idx.size());
  util::parallel_for(idx.size(), cfg.threads, [&](std::size_t k) {
    ad::Tape<float> tape;
    losses[k] = sample_loss(tape, model, samples[idx[k]], cfg, fixed.is_target, mix(cfg.seed, 0x7a1, idx[k]),
                            nullptr, false);
  });
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& l : losses) {
    if (!l.used) continue;
    total += l.value;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no validation window produced a loss");
  return total / static_cast<double>(used);
}

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,lr,train_loss,validation_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.validation_loss << '\n';
  }
}

PretrainResult run_pretraining(const model::WeatherFormer<float>& model, ad::ParameterSet<float>& params,
                               const PretrainDataset& dataset, const PretrainConfig& cfg,
                               const std::filesystem::path& run_dir,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (dataset.train.empty() || dataset.validation.empty()) {
    throw std::invalid_argument("pretraining needs training and validation windows");
  }
  const bool write = !run_dir.empty();
  if (write) {
    std::filesystem::create_directories(run_dir);
    std::ofstream(run_dir / "config.json") << run_snapshot(model, dataset, cfg).dump(2) << '\n';
  }

  PretrainResult result;
  const ad::LrSchedule schedule{cfg.base_lr, cfg.warmup_epochs, cfg.decay};
  ad::AdamState<float> adam(params);
  auto task = init_task(cfg.seed);
  std::mt19937_64 data_rng(mix(cfg.seed, 0xda7a, 0));
  std::vector<ad::Tensor<float>> best;

  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t per_epoch =
      cfg.samples_per_epoch > 0 ? std::min(cfg.samples_per_epoch, order.size()) : order.size();
  const std::size_t group = static_cast<std::size_t>(cfg.threads);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule.at(epoch);
    std::shuffle(order.begin(), order.end(), data_rng);
    double epoch_total = 0.0;
    std::size_t epoch_used = 0;
    std::size_t batch_no = 0;
    for (std::size_t b0 = 0; b0 < per_epoch; b0 += cfg.batch_size, ++batch_no) {
      const std::size_t b1 = std::min(per_epoch, b0 + cfg.batch_size);
      if (cfg.task == PretrainTask::kMaskedFeature) {
        if (cfg.rotate_targets) swap_step(task);
        for (std::size_t m = 0; m < data::kMeasurementCount; ++m) result.target_batches[m] += task.is_target[m];
      }
      ++result.batches;
      params.zero_grad();
      // Gradients are summed in window order whatever the thread count.
      std::vector<SampleLoss> losses(b1 - b0);
      try {
        for (std::size_t g0 = b0; g0 < b1; g0 += group) {
          const std::size_t g1 = std::min(b1, g0 + group);
          std::vector<std::unique_ptr<ad::Tape<float>>> tapes(g1 - g0);
          util::parallel_for(g1 - g0, cfg.threads, [&](std::size_t k) {
            const std::size_t pos = g0 + k;
            const std::size_t idx = order[pos];
            tapes[k] = std::make_unique<ad::Tape<float>>();
            nn::Rng drop(mix(cfg.seed, static_cast<std::uint64_t>(epoch) << 32 | 1u, pos));
            losses[pos - b0] = sample_loss(*tapes[k], model, dataset.train[idx], cfg, task.is_target,
                                           mix(cfg.seed, static_cast<std::uint64_t>(epoch) << 32, idx), &drop, true);
          });
          for (std::size_t k = 0; k < tapes.size(); ++k) {
            if (losses[g0 + k - b0].used) tapes[k]->flush_parameter_grads();
          }
        }
      } catch (const ad::NumericError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) + ": " +
                              e.what());
      }
      std::size_t used = 0;
      for (const auto& l : losses) {
        if (!l.used) continue;
        if (!std::isfinite(l.value)) {
          throw DivergenceError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) +
                                ": non-finite loss");
        }
        epoch_total += l.value;
        ++used;
      }
      if (used == 0) continue;
      epoch_used += used;
      const float inv = 1.0f / static_cast<float>(used);
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (auto& g : params[p].grad.values()) g *= inv;
      }
      try {
        ad::adam_step(adam, params, lr);
      } catch (const ad::NumericError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) + ": " +
                              e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_used > 0 ? epoch_total / static_cast<double>(epoch_used) : 0.0;
    rec.validation_loss = evaluate_pretraining(model, dataset.validation, cfg);
    if (!std::isfinite(rec.validation_loss)) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    result.history.push_back(rec);
    if (result.best_epoch < 0 || rec.validation_loss < result.best_validation_loss) {
      result.best_epoch = epoch;
      result.best_validation_loss = rec.validation_loss;
      best.clear();
      for (std::size_t p = 0; p < params.size(); ++p) best.push_back(params[p].value);
      if (write) ad::save_checkpoint(run_dir / "best.wfck", params, run_snapshot(model, dataset, cfg));
    }
    if (write) write_loss_csv(run_dir / "loss.csv", result.history);
    if (on_epoch) on_epoch(rec);
  }

  if (write) ad::save_checkpoint(run_dir / "last.wfck", params, run_snapshot(model, dataset, cfg));
  for (std::size_t p = 0; p < params.size(); ++p) params[p].value = best[p];
  return result;
}

}  // namespace wf::pretrain
