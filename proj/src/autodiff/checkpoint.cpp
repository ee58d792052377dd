#include "weatherformer/autodiff/checkpoint.hpp"

#include <type_traits>

#include "weatherformer/util/binary_io.hpp"

namespace wf::ad {
namespace {

constexpr std::string_view kMagic = "WFCK";

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, double> ? DType::kFloat64 : DType::kFloat32;
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename T>
Checkpoint make_checkpoint(const ParameterSet<T>& params, nlohmann::json config) {
  Checkpoint ck;
  ck.config = std::move(config);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    CheckpointEntry e;
    e.name = p.name;
    e.dtype = dtype_of<T>();
    e.shape = p.value.shape();
    e.values.assign(p.value.values().begin(), p.value.values().end());
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  util::ByteWriter w;
  w.bytes(kMagic);
  w.u32(checkpoint.version);
  w.str(checkpoint.config.dump());
  w.u32(static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    w.str(e.name);
    w.u8(static_cast<std::uint8_t>(e.dtype));
    w.u32(static_cast<std::uint32_t>(e.shape.rows));
    w.u32(static_cast<std::uint32_t>(e.shape.cols));
    for (double v : e.values) {
      if (e.dtype == DType::kFloat64) {
        w.f64(v);
      } else {
        w.f32(static_cast<float>(v));
      }
    }
  }
  util::write_file_bytes(path.string(), w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = util::read_file_bytes(path.string());
  util::ByteReader r(bytes);
  try {
    if (r.bytes(4) != kMagic) throw CheckpointError("not a checkpoint file: " + path.string());
    Checkpoint ck;
    ck.version = r.u32();
    if (ck.version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version));
    }
    ck.config = nlohmann::json::parse(r.str());
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      CheckpointEntry e;
      e.name = r.str();
      const auto dt = r.u8();
      if (dt > 1) throw CheckpointError("unknown dtype tag for " + e.name);
      e.dtype = static_cast<DType>(dt);
      e.shape.rows = r.u32();
      e.shape.cols = r.u32();
      e.values.resize(e.shape.size());
      for (auto& v : e.values) v = e.dtype == DType::kFloat64 ? r.f64() : r.f32();
      ck.entries.push_back(std::move(e));
    }
    if (r.remaining() != 0) throw CheckpointError("trailing bytes in checkpoint");
    return ck;
  } catch (const util::TruncatedError& e) {
    throw CheckpointError("truncated checkpoint " + path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad checkpoint config header: " + std::string(e.what()));
  }
}

template <typename T>
std::size_t load_parameters(const Checkpoint& checkpoint, ParameterSet<T>& params,
                            bool allow_unmatched) {
  std::size_t loaded = 0;
  for (const auto& e : checkpoint.entries) {
    auto* p = params.find(e.name);
    if (p == nullptr) {
      if (allow_unmatched) continue;
      throw CheckpointError("checkpoint parameter has no destination: " + e.name);
    }
    if (!(p->value.shape() == e.shape)) {
      throw CheckpointError("shape mismatch for " + e.name + ": checkpoint " + e.shape.str() +
                            ", model " + p->value.shape().str());
    }
    for (std::size_t k = 0; k < e.values.size(); ++k) p->value[k] = static_cast<T>(e.values[k]);
    ++loaded;
  }
  return loaded;
}

template Checkpoint make_checkpoint(const ParameterSet<float>&, nlohmann::json);
template Checkpoint make_checkpoint(const ParameterSet<double>&, nlohmann::json);
template std::size_t load_parameters(const Checkpoint&, ParameterSet<float>&, bool);
template std::size_t load_parameters(const Checkpoint&, ParameterSet<double>&, bool);

}  // namespace wf::ad
