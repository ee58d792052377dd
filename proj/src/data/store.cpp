#include "weatherformer/data/store.hpp"

#include <zlib.h>

#include "weatherformer/util/binary_io.hpp"

namespace wf::data {

using util::ByteReader;
using util::ByteWriter;

namespace {

constexpr char kMagic[4] = {'W', 'F', 'D', 'S'};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

void encode_tile(const GridTile& t, ByteWriter& w) {
  w.f64(t.bounds.lat_min);
  w.f64(t.bounds.lat_max);
  w.f64(t.bounds.lon_min);
  w.f64(t.bounds.lon_max);
  w.u8(static_cast<std::uint8_t>(t.split));
  w.u32(static_cast<std::uint32_t>(t.coordinates.size()));
  w.i32(t.first_year);
  w.i32(t.last_year);
  w.u16(static_cast<std::uint16_t>(t.granularity_days));
  for (const auto& c : t.coordinates) {
    w.f64(c.latitude);
    w.f64(c.longitude);
  }
  for (const auto& per_coord : t.series) {
    for (const auto& s : per_coord) {
      w.u32(static_cast<std::uint32_t>(s.rows));
      w.u32(static_cast<std::uint32_t>(s.valid_len));
      w.u8(s.standardized ? 1 : 0);
      w.f64(s.latitude);
      w.f64(s.longitude);
      w.i32(static_cast<int>(s.start_date.year()));
      w.u8(static_cast<std::uint8_t>(static_cast<unsigned>(s.start_date.month())));
      w.u8(static_cast<std::uint8_t>(static_cast<unsigned>(s.start_date.day())));
      for (float v : s.values) w.f32(v);
    }
  }
}

GridTile decode_tile(ByteReader& r) {
  GridTile t;
  t.bounds.lat_min = r.f64();
  t.bounds.lat_max = r.f64();
  t.bounds.lon_min = r.f64();
  t.bounds.lon_max = r.f64();
  const auto split = r.u8();
  if (split > 1) throw StoreError(StoreError::Kind::kMalformed, "store: bad split tag");
  t.split = static_cast<SplitTag>(split);
  const std::uint32_t n_coords = r.u32();
  t.first_year = r.i32();
  t.last_year = r.i32();
  t.granularity_days = r.u16();
  if (t.last_year < t.first_year) throw StoreError(StoreError::Kind::kMalformed, "store: bad year range");
  // every coordinate costs 16 bytes; reject counts the payload cannot hold
  if (static_cast<std::uint64_t>(n_coords) * 16 > r.remaining()) {
    throw util::TruncatedError("store: coordinate block truncated");
  }
  t.coordinates.resize(n_coords);
  for (auto& c : t.coordinates) {
    c.latitude = r.f64();
    c.longitude = r.f64();
  }
  t.series.resize(n_coords);
  for (auto& per_coord : t.series) {
    per_coord.resize(t.year_count());
    for (auto& s : per_coord) {
      s.rows = r.u32();
      s.valid_len = r.u32();
      s.standardized = r.u8() != 0;
      s.latitude = r.f64();
      s.longitude = r.f64();
      const int y = r.i32();
      const unsigned mo = r.u8();
      const unsigned d = r.u8();
      s.start_date = Date{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
      s.granularity_days = t.granularity_days;
      if (static_cast<std::uint64_t>(s.rows) * kMeasurementCount * 4 > r.remaining()) {
        throw util::TruncatedError("store: series values truncated");
      }
      s.values.resize(s.rows * kMeasurementCount);
      for (auto& v : s.values) v = r.f32();
      if (s.valid_len > s.rows || !s.start_date.ok()) {
        throw StoreError(StoreError::Kind::kMalformed, "store: bad series header");
      }
    }
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> encode_store(const std::vector<GridTile>& tiles) {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u16(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(tiles.size()));
  for (const auto& t : tiles) {
    t.validate();
    ByteWriter payload;
    encode_tile(t, payload);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.buffer().insert(w.buffer().end(), payload.buffer().begin(), payload.buffer().end());
    w.u32(crc_of(payload.buffer().data(), payload.size()));
  }
  return w.buffer();
}

std::vector<GridTile> decode_store(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  try {
    if (r.bytes(4) != std::string_view(kMagic, 4)) {
      throw StoreError(StoreError::Kind::kBadMagic, "store: bad magic bytes");
    }
    const auto version = r.u16();
    if (version != kStoreVersion) {
      throw StoreError(StoreError::Kind::kVersion,
                       "store: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n = r.u32();
    std::vector<GridTile> tiles;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t len = r.u32();
      if (len > r.remaining()) throw util::TruncatedError("store: tile payload truncated");
      const std::uint8_t* start = r.cursor();
      ByteReader body(start, len);
      r.bytes(len);
      const std::uint32_t crc = r.u32();
      if (crc != crc_of(start, len)) {
        throw StoreError(StoreError::Kind::kChecksum, "store: checksum mismatch in tile " + std::to_string(i));
      }
      tiles.push_back(decode_tile(body));
      if (body.remaining() != 0) throw StoreError(StoreError::Kind::kMalformed, "store: trailing tile bytes");
    }
    if (r.remaining() != 0) throw StoreError(StoreError::Kind::kMalformed, "store: trailing bytes");
    return tiles;
  } catch (const util::TruncatedError& e) {
    throw StoreError(StoreError::Kind::kTruncated, e.what());
  }
}

void write_store(const std::vector<GridTile>& tiles, const std::string& path) {
  util::write_file_bytes(path, encode_store(tiles));
}

std::vector<GridTile> read_store(const std::string& path) { return decode_store(util::read_file_bytes(path)); }

}  // namespace wf::data
