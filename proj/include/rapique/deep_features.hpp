#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rapique/binary_io.hpp"
#include "rapique/error.hpp"

namespace rapique {

inline constexpr std::string_view kDeepMagic = "DFV1";
inline constexpr std::size_t kDeepDim = 2048;

// Per-chunk deep feature rows as stored in a DFV1 sidecar:
//   "DFV1" | u32 LE frame_count | u32 LE dim | frame_count*dim f32 LE, row-major
struct DeepFeatures {
  std::uint32_t dim = 0;
  std::vector<std::vector<float>> rows;
};

inline DeepFeatures decode_deep_features(const std::vector<unsigned char>& bytes,
                                         std::size_t expected_chunks) {
  binary::Reader r(bytes, "DFV1");
  require(r.remaining() >= 4, ErrorKind::parse, "DFV1: file shorter than its magic");
  const std::string magic = r.magic(4);
  require(magic == kDeepMagic, ErrorKind::parse, "DFV1: bad magic '" + magic + "'");
  require(r.remaining() >= 8, ErrorKind::parse, "DFV1: header truncated");
  const std::uint32_t count = r.u32();
  DeepFeatures out;
  out.dim = r.u32();
  require(out.dim > 0, ErrorKind::parse, "DFV1: dim must be positive");
  require(count == expected_chunks, ErrorKind::alignment,
          "DFV1: sidecar has " + std::to_string(count) + " rows but the schedule has " +
              std::to_string(expected_chunks) + " chunks");
  const std::uint64_t payload = static_cast<std::uint64_t>(count) * out.dim * 4;
  require(r.remaining() == payload, ErrorKind::parse,
          "DFV1: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
              std::to_string(payload));
  out.rows.assign(count, std::vector<float>(out.dim));
  for (std::uint32_t i = 0; i < count; ++i)
    for (std::uint32_t d = 0; d < out.dim; ++d) {
      const float v = r.f32();
      require(std::isfinite(v), ErrorKind::data,
              "DFV1: non-finite value at row " + std::to_string(i) + ", column " + std::to_string(d));
      out.rows[i][d] = v;
    }
  return out;
}

inline DeepFeatures read_deep_features(const std::filesystem::path& path,
                                       std::size_t expected_chunks) {
  return decode_deep_features(binary::read_file(path), expected_chunks);
}

inline std::vector<unsigned char> encode_deep_features(const DeepFeatures& df) {
  std::vector<unsigned char> out;
  out.reserve(12 + df.rows.size() * df.dim * 4);
  binary::put_magic(out, kDeepMagic);
  binary::put_u32(out, static_cast<std::uint32_t>(df.rows.size()));
  binary::put_u32(out, df.dim);
  for (const auto& row : df.rows) {
    require(row.size() == df.dim, ErrorKind::geometry, "DFV1: row length differs from dim");
    for (float v : row) binary::put_f32(out, v);
  }
  return out;
}

inline void write_deep_features(const std::filesystem::path& path, const DeepFeatures& df) {
  binary::write_file(path, encode_deep_features(df));
}

// Elementwise mean across chunk rows.
inline std::vector<double> pool_deep(std::span<const std::vector<float>> rows) {
  require(!rows.empty(), ErrorKind::precondition, "pool_deep needs at least one chunk");
  std::vector<double> mean(rows[0].size(), 0.0);
  for (const auto& row : rows) {
    require(row.size() == mean.size(), ErrorKind::geometry, "deep rows differ in length");
    for (std::size_t d = 0; d < row.size(); ++d) mean[d] += row[d];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace rapique
