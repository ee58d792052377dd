#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "weatherformer/data/series.hpp"

namespace wf::data {

inline constexpr std::uint16_t kStoreVersion = 1;

class StoreError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersion, kTruncated, kChecksum, kMalformed };
  StoreError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Binary tile store: "WFDS", u16 version, u32 tile count, then per tile a
/// payload (bounds, split, coordinates, year range, granularity, series)
/// followed by the CRC32 of that payload. All values little-endian.
std::vector<std::uint8_t> encode_store(const std::vector<GridTile>& tiles);
std::vector<GridTile> decode_store(const std::vector<std::uint8_t>& bytes);

void write_store(const std::vector<GridTile>& tiles, const std::string& path);
std::vector<GridTile> read_store(const std::string& path);

}  // namespace wf::data
