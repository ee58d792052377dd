#include "weatherformer/yield/evaluate.hpp"

#include <fstream>
#include <set>

namespace wf::yield {

model::FitConfig default_yield_fit() {
  model::FitConfig c;
  c.epochs = 40;
  c.batch_size = 64;
  c.base_lr = 5e-4;
  c.warmup_epochs = 10;
  c.decay = 0.95;
  return c;
}

nlohmann::json YieldRunConfig::to_json() const { return {{"model", model.to_json()}, {"fit", fit.to_json()}}; }

namespace {

std::vector<const YieldRecord*> records_of(const YieldTable& table, const std::vector<std::string>& states) {
  const std::set<std::string> wanted(states.begin(), states.end());
  std::vector<const YieldRecord*> out;
  for (const auto& r : table.records) {
    if (wanted.contains(r.state)) out.push_back(&r);
  }
  return out;
}

void check_pretrained(const ad::Checkpoint& ck, const model::ModelConfig& expected) {
  if (ck.config.contains("model")) {
    const auto got = model::ModelConfig::from_json(ck.config.at("model"));
    if (got.to_json() != expected.to_json()) {
      throw std::invalid_argument("pretrained checkpoint model config differs from the fine-tuning weather encoder");
    }
  }
}

}  // namespace

FoldResult train_fold(const YieldTable& table, const SplitPlan::Fold& fold, const YieldRunConfig& cfg,
                      std::uint64_t seed, const ad::Checkpoint* pretrained) {
  auto mcfg = cfg.model;
  mcfg.practice_count = table.practice_count;
  mcfg.validate();
  const auto train_records = records_of(table, fold.train);
  if (train_records.empty()) throw std::invalid_argument("fold has no training records");
  const auto scaler = YieldScaler::fit(train_records);
  const auto train = build_samples(table, fold.train, mcfg.history, scaler);
  const auto val = build_samples(table, fold.validation, mcfg.history, scaler);
  if (train.empty()) throw std::invalid_argument("fold has no training samples at history " + std::to_string(mcfg.history));
  if (val.empty()) throw std::invalid_argument("fold has no validation samples");

  FoldResult res;
  for (const auto& s : val) res.truth.push_back(s.target);

  if (mcfg.variant == YieldVariant::kLinearRegression) {
    LinearYieldModel lr(mcfg.history);
    lr.fit(train);
    for (const auto& s : val) res.predictions.push_back(scaler.to_bushels(lr.predict(s)));
    res.rmse = rmse(res.predictions, res.truth);
    res.best_epoch = 0;
    return res;
  }

  nn::Rng rng(seed);
  ad::ParameterSet<float> params;
  YieldNet<float> net(params, mcfg, rng);
  if (pretrained != nullptr) {
    if (mcfg.variant != YieldVariant::kWfLinear && mcfg.variant != YieldVariant::kWfTransformer) {
      throw std::invalid_argument("only WF variants take a pretrained encoder");
    }
    check_pretrained(*pretrained, mcfg.weather);
    if (ad::load_parameters(*pretrained, params, true) == 0) {
      throw std::invalid_argument("pretrained checkpoint has no weather encoder parameters");
    }
  }

  std::vector<double> preds(val.size());
  auto predict_all = [&] {
    util::parallel_for(val.size(), cfg.fit.threads, [&](std::size_t i) {
      ad::Tape<float> tape;
      preds[i] = scaler.to_bushels(net.forward(tape, val[i]).value()[0]);
    });
  };
  auto fit_cfg = cfg.fit;
  fit_cfg.seed = seed;
  const auto fitted = model::fit<float>(
      params, train.size(),
      [&](ad::Tape<float>& tape, std::size_t i, std::mt19937_64& drop) {
        auto pred = net.forward(tape, train[i], &drop);
        return ad::mse(pred, tape.constant(ad::Tensor<float>::scalar(train[i].target_standardized)));
      },
      [&] {
        predict_all();
        return rmse(preds, res.truth);
      },
      fit_cfg);
  predict_all();
  res.predictions = preds;
  res.rmse = fitted.best_validation;
  res.best_epoch = fitted.best_epoch;
  res.history = fitted.history;
  return res;
}

CrossValidation evaluate_folds(const YieldTable& table, const SplitPlan& plan, const YieldRunConfig& cfg,
                               const ad::Checkpoint* pretrained) {
  CrossValidation cv;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    auto r = train_fold(table, plan.folds[f], cfg, plan.seed * 1000 + f, pretrained);
    r.fold = f;
    cv.mean_rmse += r.rmse;
    cv.folds.push_back(std::move(r));
  }
  if (cv.folds.empty()) throw std::invalid_argument("split plan has no folds");
  cv.mean_rmse /= static_cast<double>(cv.folds.size());
  return cv;
}

void write_fold_csv(const std::filesystem::path& path, const CrossValidation& cv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "fold,rmse,best_epoch\n";
  for (const auto& f : cv.folds) out << f.fold << ',' << f.rmse << ',' << f.best_epoch << '\n';
  out << "mean," << cv.mean_rmse << ",\n";
}

}  // namespace wf::yield
