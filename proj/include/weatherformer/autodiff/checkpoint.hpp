#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "weatherformer/autodiff/parameter.hpp"

namespace wf::ad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::kFloat32;
  Shape shape;
  std::vector<double> values;
};

/// In-memory form of a checkpoint file.
///
/// File layout (little-endian):
///   "WFCK" | u32 version | u32 config_len | config JSON bytes |
///   u32 entry_count | entries...
/// entry: u32 name_len | name | u8 dtype | u32 rows | u32 cols | raw values
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json config = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

template <typename T>
Checkpoint make_checkpoint(const ParameterSet<T>& params, nlohmann::json config);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterSet<T>& params,
                     const nlohmann::json& config) {
  save_checkpoint(path, make_checkpoint(params, config));
}

/// Copies checkpoint values into same-named parameters. Entries without a
/// matching parameter are ignored when `allow_unmatched` is set; a shape
/// mismatch is always an error. Returns the number of parameters loaded.
template <typename T>
std::size_t load_parameters(const Checkpoint& checkpoint, ParameterSet<T>& params,
                            bool allow_unmatched = false);

}  // namespace wf::ad
