#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"

namespace wf::model {

enum class Activation { kRelu, kGelu };

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t n_layers = 6;
  std::size_t ff_width = 512;
  std::size_t in_dim = 31;
  std::size_t out_dim = 31;
  std::size_t max_len = 365;
  double dropout = 0.0;
  /// false: residual then layer norm (post-norm); true: norm inside the residual branch.
  bool norm_first = false;
  Activation activation = Activation::kRelu;

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  /// "2m", "8m" or "tiny"; throws for other names.
  static ModelConfig preset(const std::string& name);
};

}  // namespace wf::model
