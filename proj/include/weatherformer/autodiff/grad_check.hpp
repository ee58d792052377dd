#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "weatherformer/autodiff/parameter.hpp"
#include "weatherformer/autodiff/tape.hpp"

namespace wf::ad {

class NonDeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled without replacement; all coordinates when the model
  /// has fewer.
  std::size_t samples = 50;
  std::uint64_t seed = 0;
  /// Restrict sampling to these parameter names (empty = every trainable one).
  std::vector<std::string> only;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

/// Compares reverse-mode gradients against central finite differences.
/// Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(ParameterSet<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options = {});

}  // namespace wf::ad
