#include "weatherformer/model/config.hpp"

#include <stdexcept>

namespace wf::model {

void ModelConfig::validate() const {
  if (d_model == 0 || d_model % 4 != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of 4, got " + std::to_string(d_model));
  }
  if (n_heads == 0 || d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (ff_width == 0) throw std::invalid_argument("ff_width must be positive");
  if (in_dim != 31) throw std::invalid_argument("in_dim must be 31");
  if (out_dim == 0) throw std::invalid_argument("out_dim must be positive");
  if (max_len != 365) throw std::invalid_argument("max_len must be 365");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d_model", d_model},   {"n_heads", n_heads}, {"n_layers", n_layers},     {"ff_width", ff_width},
          {"in_dim", in_dim},     {"out_dim", out_dim}, {"max_len", max_len},       {"dropout", dropout},
          {"norm_first", norm_first}, {"activation", activation == Activation::kGelu ? "gelu" : "relu"}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.ff_width = j.at("ff_width").get<std::size_t>();
  c.in_dim = j.value("in_dim", std::size_t{31});
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.max_len = j.value("max_len", std::size_t{365});
  c.dropout = j.value("dropout", 0.0);
  c.norm_first = j.value("norm_first", false);
  const auto act = j.value("activation", std::string("relu"));
  if (act != "relu" && act != "gelu") throw std::invalid_argument("unknown activation " + act);
  c.activation = act == "gelu" ? Activation::kGelu : Activation::kRelu;
  c.validate();
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "2m") {
    c.d_model = 128;
    c.n_heads = 4;
    c.n_layers = 6;
    c.ff_width = 512;
  } else if (name == "8m") {
    c.d_model = 256;
    c.n_heads = 8;
    c.n_layers = 8;
    c.ff_width = 1024;
  } else if (name == "tiny") {
    c.d_model = 32;
    c.n_heads = 2;
    c.n_layers = 2;
    c.ff_width = 64;
  } else {
    throw std::invalid_argument("unknown model preset '" + name + "'");
  }
  return c;
}

}  // namespace wf::model
