#include "weatherformer/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

namespace wf::ad {
namespace {

double evaluate(const LossBuilder& loss) {
  Tape<double> tape;
  auto l = loss(tape);
  if (l.value().size() != 1) throw TapeError("grad_check loss must be scalar");
  return l.value()[0];
}

}  // namespace

GradCheckReport grad_check(ParameterSet<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options) {
  const double base = evaluate(loss);
  if (evaluate(loss) != base) {
    throw NonDeterministicError("loss differs between two identical forward passes");
  }

  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& prm = params[p];
    if (!prm.trainable) continue;
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), prm.name) == options.only.end()) {
      continue;
    }
    for (std::size_t k = 0; k < prm.value.size(); ++k) coords.emplace_back(p, k);
  }
  if (coords.size() > options.samples) {
    std::mt19937_64 rng(options.seed);
    std::vector<std::pair<std::size_t, std::size_t>> picked;
    std::sample(coords.begin(), coords.end(), std::back_inserter(picked), options.samples, rng);
    coords = std::move(picked);
  }

  GradCheckReport report;
  report.coordinates = coords.size();
  for (const auto& [p, k] : coords) {
    auto& prm = params[p];
    const double original = prm.value[k];
    prm.value[k] = original + options.step;
    const double plus = evaluate(loss);
    prm.value[k] = original - options.step;
    const double minus = evaluate(loss);
    prm.value[k] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double analytic = prm.grad[k];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (report.worst_parameter.empty() || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = prm.name;
      report.worst_index = k;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace wf::ad
