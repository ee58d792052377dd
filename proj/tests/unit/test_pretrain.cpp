#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "weatherformer/autodiff/checkpoint.hpp"
#include "weatherformer/data/synthetic.hpp"
#include "weatherformer/pretrain/trainer.hpp"

using namespace wf;
using namespace wf::pretrain;

namespace {

std::set<std::size_t> target_set(const PretrainTaskState& s) {
  const auto t = s.targets();
  return {t.begin(), t.end()};
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.ff_width = 32;
  return c;
}

PretrainDataset tiny_dataset(std::size_t rows = 16) {
  data::SynthSpec spec;
  spec.tiles = 2;
  spec.points_per_tile = 3;
  spec.noise_sigma = 0.1;
  spec.kind = data::SynthKind::kLinearLatent;
  auto tiles = data::generate_synthetic(spec, 4);
  tiles[1].split = data::SplitTag::kValidation;
  WindowOptions opts;
  opts.windows = {{1, rows}, {7, 8}};
  return build_dataset(tiles, opts);
}

PretrainConfig tiny_config() {
  PretrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.base_lr = 1e-3;
  c.warmup_epochs = 1;
  c.seed = 21;
  c.samples_per_epoch = 32;
  c.validation_samples = 12;
  return c;
}

}  // namespace

TEST_CASE("init_task draws a 10/21 partition") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = init_task(seed);
    const auto t = s.targets();
    const auto i = s.inputs();
    CHECK(t.size() == 10);
    CHECK(i.size() == 21);
    std::set<std::size_t> all(t.begin(), t.end());
    all.insert(i.begin(), i.end());
    CHECK(all.size() == 31);
    CHECK(*all.rbegin() == 30);
    const auto mask = s.input_mask();
    for (std::size_t m : t) CHECK_FALSE(mask[m]);
    for (std::size_t m : i) CHECK(mask[m]);
  }
  CHECK(init_task(9).is_target == init_task(9).is_target);
  CHECK(init_task(9).is_target != init_task(10).is_target);
}

TEST_CASE("a swap exchanges exactly one target and one input") {
  auto s = init_task(3);
  for (int k = 0; k < 10000; ++k) {
    const auto before = target_set(s);
    swap_step(s);
    const auto after = target_set(s);
    std::vector<std::size_t> diff;
    std::set_symmetric_difference(before.begin(), before.end(), after.begin(), after.end(), std::back_inserter(diff));
    REQUIRE(diff.size() == 2);
    REQUIRE(s.targets().size() == 10);
  }
  CHECK(s.swaps == 10000);
}

TEST_CASE("swap chain coverage and long-run frequency") {
  // Each batch brings one of 21 inputs into the target set, so full coverage
  // needs roughly the coupon-collector count of batches. Estimate it from an
  // independent simulation of the chain.
  auto covered_after = [](std::uint64_t seed, int batches) {
    std::mt19937_64 rng(seed);
    std::vector<int> ids(31);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<int> targets(ids.begin(), ids.begin() + 10), inputs(ids.begin() + 10, ids.end());
    std::set<int> seen(targets.begin(), targets.end());
    for (int b = 0; b < batches; ++b) {
      const auto t = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
      const auto i = std::uniform_int_distribution<std::size_t>(0, 20)(rng);
      std::swap(targets[t], inputs[i]);
      seen.insert(targets[t]);
    }
    return seen.size() == 31;
  };
  int full31 = 0, full128 = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    full31 += covered_after(seed, 31);
    full128 += covered_after(seed, 128);
  }
  MESSAGE("full coverage rate: 31 batches " << full31 / 2000.0 << ", 128 batches " << full128 / 2000.0);
  CHECK(full128 / 2000.0 > 0.9);

  auto s = init_task(77);
  std::array<int, 31> hits{};
  for (int m : s.targets()) ++hits[static_cast<std::size_t>(m)];
  for (int b = 0; b < 127; ++b) {
    swap_step(s);
    for (std::size_t m : s.targets()) ++hits[m];
  }
  for (int h : hits) CHECK(h > 0);

  // 75 epochs at a few hundred batches each
  auto chain = init_task(5);
  std::array<double, 31> freq{};
  const int steps = 75 * 200;
  for (int b = 0; b < steps; ++b) {
    swap_step(chain);
    for (std::size_t m : chain.targets()) freq[m] += 1.0;
  }
  for (double f : freq) {
    const double rate = f / steps;
    CHECK(rate > 0.5 * 10.0 / 31.0);
    CHECK(rate < 1.5 * 10.0 / 31.0);
  }
}

TEST_CASE("masked feature loss arithmetic and masking") {
  const std::size_t n = 6;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  ad::Tensor<double> truth(n, 31);
  for (auto& v : truth.values()) v = z(rng);
  const auto task = init_task(1);
  const auto padding = model::PaddingMask::prefix(n, 4);
  {
    ad::Tape<double> tape;
    CHECK(masked_feature_loss(tape.constant(truth), truth, task.is_target, padding).value()[0] == 0.0);
  }
  auto off = truth;
  off(2, task.targets()[3]) += 2.0;
  {
    ad::Tape<double> tape;
    CHECK(masked_feature_loss(tape.constant(off), truth, task.is_target, padding).value()[0] ==
          doctest::Approx(4.0 / (10.0 * 4.0)).epsilon(1e-15));
  }
  auto noise = off;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t m : task.inputs()) noise(r, m) = 1e3 * z(rng);
  }
  for (std::size_t r = 4; r < n; ++r) {
    for (std::size_t m = 0; m < 31; ++m) noise(r, m) = -1e4;
  }
  ad::Tape<double> t1, t2;
  CHECK(masked_feature_loss(t1.constant(noise), truth, task.is_target, padding).value()[0] ==
        masked_feature_loss(t2.constant(off), truth, task.is_target, padding).value()[0]);
  std::array<bool, 31> none{};
  CHECK_THROWS(masked_feature_loss(t1.constant(truth), truth, none, padding));
  CHECK_THROWS(masked_feature_loss(t1.constant(truth), ad::Tensor<double>(n, 30), task.is_target, padding));
}

TEST_CASE("mlm mask rate stays within binomial bounds") {
  std::mt19937_64 rng(11);
  std::size_t masked = 0, real = 0;
  for (int s = 0; s < 1000; ++s) {
    const auto pad = model::PaddingMask::prefix(365, 300 + static_cast<std::size_t>(s % 66));
    const auto m = mlm_mask(pad, 0.15, rng);
    for (std::size_t t = 0; t < 365; ++t) {
      if (m.masked[t]) REQUIRE(pad[t]);
    }
    masked += m.count;
    real += pad.real_count();
  }
  const double mean = 0.15 * static_cast<double>(real);
  const double sd = std::sqrt(static_cast<double>(real) * 0.15 * 0.85);
  CHECK(std::abs(static_cast<double>(masked) - mean) <= 3.0 * sd);

  const auto pad = model::PaddingMask(50);
  const auto a = mlm_mask(pad, 0.15, std::uint64_t{4});
  const auto b = mlm_mask(pad, 0.15, std::uint64_t{4});
  CHECK(std::equal(a.masked.span().begin(), a.masked.span().end(), b.masked.span().begin()));
  CHECK_THROWS(mlm_mask(pad, 0.0, std::uint64_t{1}));
  CHECK_THROWS(mlm_mask(pad, 1.0, std::uint64_t{1}));
}

TEST_CASE("mlm masking zeroes rows and scores them on all features") {
  ad::Tensor<float> x(5, 31, 2.0f);
  MlmMask mask{model::PaddingMask(5, false), 2};
  mask.masked.set(1, true);
  mask.masked.set(3, true);
  const auto zeroed = apply_mlm_mask(x, mask);
  for (std::size_t m = 0; m < 31; ++m) {
    CHECK(zeroed(1, m) == 0.0f);
    CHECK(zeroed(0, m) == 2.0f);
  }
  ad::Tape<float> tape;
  auto pred = x;
  pred(1, 7) = 5.0f;   // masked row: counted
  pred(0, 7) = 100.f;  // unmasked row: ignored
  CHECK(mlm_loss(tape.constant(pred), x, mask).value()[0] == doctest::Approx(9.0 / 62.0));
  MlmMask empty{model::PaddingMask(5, false), 0};
  CHECK_THROWS(mlm_loss(tape.constant(pred), x, empty));
}

TEST_CASE("dataset windows share daily statistics across granularities") {
  const auto ds = tiny_dataset();
  // 3 points x 366 days (2000 is a leap year): 22 daily windows + 1 partial of 14, 6 weekly windows + 1 partial dropped
  CHECK(ds.train.size() == 3 * (23 + 6));
  CHECK(ds.validation.size() == 3 * (23 + 6));
  double daily_ss = 0.0, weekly_ss = 0.0;
  std::size_t daily_n = 0, weekly_n = 0;
  for (const auto& s : ds.train) {
    REQUIRE(s.padding.size() == s.x.rows());
    for (std::size_t t = s.padding.real_count(); t < s.x.rows(); ++t) {
      for (std::size_t m = 0; m < 31; ++m) REQUIRE(s.x(t, m) == 0.0f);
    }
    for (std::size_t t = 0; t < s.padding.real_count(); ++t) {
      for (std::size_t m = 0; m < 31; ++m) {
        const double v = s.x(t, m);
        (s.ctx.granularity_days == 1 ? daily_ss : weekly_ss) += v * v;
        (s.ctx.granularity_days == 1 ? daily_n : weekly_n) += 1;
      }
    }
  }
  CHECK(daily_ss / static_cast<double>(daily_n) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(weekly_ss / static_cast<double>(weekly_n) < daily_ss / static_cast<double>(daily_n));
  const auto& w = ds.train[23];
  CHECK(w.ctx.granularity_days == 7);
  CHECK(w.ctx.year == 2000);
  CHECK(ds.train[1].ctx.start_day_index - ds.train[0].ctx.start_day_index == 16);
  CHECK(ds.train[22].padding.real_count() == 366 - 22 * 16);

  CHECK(WindowOptions::parse_windows("1:56,7:52").size() == 2);
  CHECK(WindowOptions::parse_windows("7:52")[0].rows == 52);
  CHECK_THROWS(WindowOptions::parse_windows("7-52"));
  WindowOptions bad;
  bad.windows = {{1, 400}};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("frozen parameters leave losses unchanged") {
  const auto ds = tiny_dataset();
  nn::Rng rng(1);
  ad::ParameterSet<float> params;
  model::WeatherFormer<float> m(params, tiny_model(), rng);
  for (std::size_t p = 0; p < params.size(); ++p) params[p].trainable = false;
  std::vector<ad::Tensor<float>> before;
  for (std::size_t p = 0; p < params.size(); ++p) before.push_back(params[p].value);
  auto cfg = tiny_config();
  cfg.rotate_targets = false;
  cfg.samples_per_epoch = 0;
  const auto res = run_pretraining(m, params, ds, cfg);
  REQUIRE(res.history.size() == 3);
  for (const auto& r : res.history) {
    CHECK(r.validation_loss == res.history[0].validation_loss);
    CHECK(r.train_loss == doctest::Approx(res.history[0].train_loss).epsilon(1e-12));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    CHECK(std::equal(before[p].values().begin(), before[p].values().end(), params[p].value.values().begin()));
  }
}

TEST_CASE("training reduces loss, keeps the best epoch and writes the run directory") {
  const auto ds = tiny_dataset();
  const auto dir = std::filesystem::temp_directory_path() / "wf_pretrain_test_run";
  std::filesystem::remove_all(dir);
  nn::Rng rng(1);
  ad::ParameterSet<float> params;
  model::WeatherFormer<float> m(params, tiny_model(), rng);
  auto cfg = tiny_config();
  cfg.epochs = 6;
  cfg.base_lr = 3e-3;
  cfg.samples_per_epoch = 0;
  int calls = 0;
  const auto res = run_pretraining(m, params, ds, cfg, dir, [&](const EpochRecord&) { ++calls; });
  CHECK(calls == 6);
  CHECK(res.batches == 6 * 11);
  CHECK(res.best_validation_loss < 0.8 * res.history.front().validation_loss);
  CHECK(evaluate_pretraining(m, ds.validation, cfg) == res.best_validation_loss);
  for (const auto& r : res.history) CHECK(r.validation_loss >= res.best_validation_loss);
  CHECK(std::filesystem::exists(dir / "best.wfck"));
  CHECK(std::filesystem::exists(dir / "last.wfck"));
  CHECK(std::filesystem::exists(dir / "config.json"));
  std::ifstream csv(dir / "loss.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 7);
  const auto ck = ad::load_checkpoint(dir / "best.wfck");
  CHECK(ck.config["pretrain"]["task"] == "masked-feature");
  std::filesystem::remove_all(dir);
}

TEST_CASE("same seed gives identical curves regardless of thread count") {
  const auto ds = tiny_dataset();
  auto run = [&](int threads, PretrainTask task) {
    nn::Rng rng(7);
    ad::ParameterSet<float> params;
    model::WeatherFormer<float> m(params, tiny_model(), rng);
    auto cfg = tiny_config();
    cfg.threads = threads;
    cfg.task = task;
    return run_pretraining(m, params, ds, cfg).history;
  };
  for (auto task : {PretrainTask::kMaskedFeature, PretrainTask::kMlm}) {
    const auto a = run(1, task);
    const auto b = run(1, task);
    const auto c = run(3, task);
    for (std::size_t e = 0; e < a.size(); ++e) {
      CHECK(a[e].train_loss == b[e].train_loss);
      CHECK(a[e].validation_loss == b[e].validation_loss);
      CHECK(a[e].train_loss == c[e].train_loss);
      CHECK(a[e].validation_loss == c[e].validation_loss);
    }
  }
}

TEST_CASE("a non-finite input aborts with a diagnostic") {
  auto ds = tiny_dataset();
  for (auto& s : ds.train) {
    for (std::size_t m = 0; m < 31; ++m) s.x(0, m) = std::numeric_limits<float>::infinity();
  }
  nn::Rng rng(1);
  ad::ParameterSet<float> params;
  model::WeatherFormer<float> m(params, tiny_model(), rng);
  CHECK_THROWS_AS(run_pretraining(m, params, ds, tiny_config()), DivergenceError);
  CHECK_THROWS(parse_task("autoregressive"));
  CHECK(parse_task(to_string(PretrainTask::kMlm)) == PretrainTask::kMlm);
  auto bad = tiny_config();
  bad.batch_size = 0;
  CHECK_THROWS(bad.validate());
  CHECK(PretrainConfig{}.epochs == 75);
  CHECK(PretrainConfig{}.batch_size == 64);
  CHECK(PretrainConfig{}.base_lr == 5e-4);
}
