#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rapique/error.hpp"
#include "rapique/image.hpp"

namespace rapique {

enum class PixelFormat { yuv420_8bit, yuv444_8bit, rgb24 };

constexpr std::string_view to_string(PixelFormat fmt) {
  switch (fmt) {
    case PixelFormat::yuv420_8bit: return "yuv420p";
    case PixelFormat::yuv444_8bit: return "yuv444p";
    case PixelFormat::rgb24: return "rgb24";
  }
  return "unknown";
}

inline PixelFormat pixel_format_from_string(std::string_view name) {
  if (name == "yuv420p" || name == "420") return PixelFormat::yuv420_8bit;
  if (name == "yuv444p" || name == "444") return PixelFormat::yuv444_8bit;
  if (name == "rgb24") return PixelFormat::rgb24;
  fail(ErrorKind::unsupported, "unsupported pixel format '" + std::string(name) + "'");
}

struct FrameRate {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const FrameRate&, const FrameRate&) = default;
};

struct VideoSource {
  int width = 0;
  int height = 0;
  FrameRate frame_rate;
  std::size_t frame_count = 0;
  PixelFormat pixel_format = PixelFormat::yuv420_8bit;

  friend bool operator==(const VideoSource&, const VideoSource&) = default;
};

inline void validate(const VideoSource& src) {
  require(src.width >= 64 && src.height >= 64, ErrorKind::geometry,
          "frame geometry " + std::to_string(src.width) + "x" + std::to_string(src.height) +
              " below the 64x64 minimum");
  require(src.frame_rate.num > 0 && src.frame_rate.den > 0, ErrorKind::parse,
          "frame rate must be positive");
  require(src.frame_count >= 1, ErrorKind::precondition, "video has no frames");
}

inline int chroma_width(const VideoSource& s) {
  return s.pixel_format == PixelFormat::yuv420_8bit ? (s.width + 1) / 2 : s.width;
}
inline int chroma_height(const VideoSource& s) {
  return s.pixel_format == PixelFormat::yuv420_8bit ? (s.height + 1) / 2 : s.height;
}

inline std::size_t frame_bytes(const VideoSource& s) {
  const auto luma = static_cast<std::size_t>(s.width) * s.height;
  if (s.pixel_format == PixelFormat::rgb24) return 3 * luma;
  return luma + 2 * static_cast<std::size_t>(chroma_width(s)) * chroma_height(s);
}

// One decoded frame. For YUV formats planes are (Y, U, V) with U/V possibly
// subsampled; for rgb24 planes are (R, G, B). Samples are in [0, 255].
struct Frame {
  PixelFormat format = PixelFormat::yuv420_8bit;
  std::array<Image, 3> planes;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct RgbFrame {
  Image r, g, b;

  int rows() const noexcept { return r.rows(); }
  int cols() const noexcept { return r.cols(); }
};

// Random-access frame provider. read() may be called in any order; frames are
// decoded on demand.
class FrameReader {
 public:
  virtual ~FrameReader() = default;
  virtual const VideoSource& source() const = 0;
  virtual Frame read(std::size_t index) = 0;
};

namespace detail {

inline Frame decode_frame(const VideoSource& src, std::span<const unsigned char> bytes) {
  Frame f;
  f.format = src.pixel_format;
  if (src.pixel_format == PixelFormat::rgb24) {
    for (auto& p : f.planes) p = Image(src.height, src.width);
    std::size_t k = 0;
    for (int i = 0; i < src.height; ++i)
      for (int j = 0; j < src.width; ++j)
        for (int c = 0; c < 3; ++c) f.planes[c](i, j) = bytes[k++];
    return f;
  }
  std::size_t k = 0;
  const int cw = chroma_width(src), ch = chroma_height(src);
  for (int c = 0; c < 3; ++c) {
    const int rows = c == 0 ? src.height : ch;
    const int cols = c == 0 ? src.width : cw;
    Image plane(rows, cols);
    for (double& v : plane.values()) v = bytes[k++];
    f.planes[c] = std::move(plane);
  }
  return f;
}

inline std::vector<unsigned char> encode_frame(const VideoSource& src, const Frame& f) {
  std::vector<unsigned char> out;
  out.reserve(frame_bytes(src));
  auto to_byte = [](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  };
  if (src.pixel_format == PixelFormat::rgb24) {
    for (int i = 0; i < src.height; ++i)
      for (int j = 0; j < src.width; ++j)
        for (int c = 0; c < 3; ++c) out.push_back(to_byte(f.planes[c](i, j)));
    return out;
  }
  for (const auto& plane : f.planes)
    for (double v : plane.values()) out.push_back(to_byte(v));
  return out;
}

inline std::uint64_t stream_size(std::istream& in) {
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  return static_cast<std::uint64_t>(end);
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace detail

inline constexpr std::string_view kY4mMagic = "YUV4MPEG2";

// YUV4MPEG2 reader. The stream must be seekable: the constructor scans all
// FRAME markers once to learn the frame count and payload offsets, after
// which frames are decoded lazily.
class Y4mReader final : public FrameReader {
 public:
  explicit Y4mReader(std::unique_ptr<std::istream> stream) : in_(std::move(stream)) {
    require(in_ && *in_, ErrorKind::io, "y4m stream is not readable");
    const std::uint64_t total = detail::stream_size(*in_);
    header_ = parse_header();
    scan_frames(total);
    validate(src_);
  }

  const VideoSource& source() const override { return src_; }

  Frame read(std::size_t index) override {
    require(index < offsets_.size(), ErrorKind::usage,
            "frame index " + std::to_string(index) + " out of range");
    std::vector<unsigned char> buf(frame_bytes(src_));
    in_->clear();
    in_->seekg(static_cast<std::streamoff>(offsets_[index]));
    in_->read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::size_t>(in_->gcount()) == buf.size(), ErrorKind::truncated,
            "frame " + std::to_string(index) + " payload truncated");
    return detail::decode_frame(src_, buf);
  }

  // Header tokens after the magic, as they appeared in the stream.
  const std::string& header_line() const noexcept { return header_; }

 private:
  std::string parse_header() {
    std::string line;
    char c = 0;
    while (line.size() < 4096 && in_->get(c) && c != '\n') line.push_back(c);
    require(c == '\n', ErrorKind::parse,
            "y4m header not terminated by newline (byte offset " + std::to_string(line.size()) + ")");
    require(line.compare(0, kY4mMagic.size(), kY4mMagic) == 0 &&
                (line.size() == kY4mMagic.size() || line[kY4mMagic.size()] == ' '),
            ErrorKind::parse, "bad y4m magic at byte offset 0");

    bool have_w = false, have_h = false, have_f = false;
    std::string chroma = "420jpeg";
    std::size_t pos = kY4mMagic.size();
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      const std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ') ++pos;
      const std::string_view tok(line.data() + start, pos - start);
      const std::string_view val = tok.substr(1);
      auto bad = [&](const char* what) {
        fail(ErrorKind::parse,
             std::string("malformed y4m ") + what + " token at byte offset " + std::to_string(start));
      };
      switch (tok[0]) {
        case 'W':
          if (!detail::parse_int(val, src_.width)) bad("width");
          have_w = true;
          break;
        case 'H':
          if (!detail::parse_int(val, src_.height)) bad("height");
          have_h = true;
          break;
        case 'F': {
          const auto colon = val.find(':');
          if (colon == std::string_view::npos ||
              !detail::parse_int(val.substr(0, colon), src_.frame_rate.num) ||
              !detail::parse_int(val.substr(colon + 1), src_.frame_rate.den) ||
              src_.frame_rate.num <= 0 || src_.frame_rate.den <= 0)
            bad("frame-rate");
          have_f = true;
          break;
        }
        case 'C': chroma = std::string(val); break;
        case 'I':
        case 'A':
        case 'X': break;
        default: bad("header");
      }
    }
    require(have_w && have_h, ErrorKind::parse,
            "y4m header missing W/H (byte offset " + std::to_string(line.size()) + ")");
    require(have_f, ErrorKind::parse,
            "y4m header missing F (byte offset " + std::to_string(line.size()) + ")");
    if (chroma == "420" || chroma == "420jpeg" || chroma == "420paldv" || chroma == "420mpeg2")
      src_.pixel_format = PixelFormat::yuv420_8bit;
    else if (chroma == "444")
      src_.pixel_format = PixelFormat::yuv444_8bit;
    else
      fail(ErrorKind::unsupported, "unsupported y4m chroma format C" + chroma);
    require(src_.width > 0 && src_.height > 0, ErrorKind::parse, "y4m geometry must be positive");
    return line;
  }

  void scan_frames(std::uint64_t total) {
    const std::size_t payload = frame_bytes(src_);
    std::uint64_t pos = static_cast<std::uint64_t>(in_->tellg());
    while (pos < total) {
      char tag[5] = {};
      in_->read(tag, 5);
      require(in_->gcount() == 5 && std::string_view(tag, 5) == "FRAME", ErrorKind::parse,
              "expected FRAME marker at byte offset " + std::to_string(pos));
      char c = 0;
      std::size_t param_len = 0;
      while (in_->get(c) && c != '\n') {
        require(++param_len < 1024, ErrorKind::parse,
                "unterminated FRAME header at byte offset " + std::to_string(pos));
      }
      require(c == '\n', ErrorKind::truncated,
              "frame " + std::to_string(offsets_.size()) + " header truncated");
      const std::uint64_t data = pos + 5 + param_len + 1;
      require(data + payload <= total, ErrorKind::truncated,
              "frame " + std::to_string(offsets_.size()) + " payload truncated (" +
                  std::to_string(total - data) + " of " + std::to_string(payload) + " bytes)");
      offsets_.push_back(data);
      pos = data + payload;
      in_->seekg(static_cast<std::streamoff>(pos));
    }
    src_.frame_count = offsets_.size();
  }

  std::unique_ptr<std::istream> in_;
  VideoSource src_;
  std::string header_;
  std::vector<std::uint64_t> offsets_;
};

// Parse a complete in-memory YUV4MPEG2 byte stream.
inline std::unique_ptr<Y4mReader> parse_y4m(std::string bytes) {
  return std::make_unique<Y4mReader>(std::make_unique<std::istringstream>(std::move(bytes)));
}

// Open a .y4m file, or standard input when path is "-". Standard input is
// spooled into memory so it can be scanned like a regular file.
inline std::unique_ptr<Y4mReader> open_y4m(const std::filesystem::path& path) {
  if (path == "-") {
    auto spool = std::make_unique<std::stringstream>(std::ios::in | std::ios::out | std::ios::binary);
    *spool << std::cin.rdbuf();
    spool->seekg(0);
    return std::make_unique<Y4mReader>(std::move(spool));
  }
  auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
  require(file->is_open(), ErrorKind::io, "cannot open '" + path.string() + "'");
  return std::make_unique<Y4mReader>(std::move(file));
}

// Headerless planar YUV (or packed rgb24) with caller-supplied geometry.
class RawYuvReader final : public FrameReader {
 public:
  RawYuvReader(const std::filesystem::path& path, int width, int height, FrameRate rate,
               PixelFormat fmt)
      : in_(path, std::ios::binary) {
    require(in_.is_open(), ErrorKind::io, "cannot open '" + path.string() + "'");
    src_.width = width;
    src_.height = height;
    src_.frame_rate = rate;
    src_.pixel_format = fmt;
    require(width > 0 && height > 0, ErrorKind::geometry, "raw geometry must be positive");
    const std::uint64_t total = detail::stream_size(in_);
    const std::size_t per_frame = frame_bytes(src_);
    require(total > 0 && total % per_frame == 0, ErrorKind::geometry,
            "raw file size " + std::to_string(total) + " bytes is not a positive multiple of the " +
                std::to_string(per_frame) + "-byte frame size for " + std::to_string(width) + "x" +
                std::to_string(height) + " " + std::string(to_string(fmt)));
    src_.frame_count = total / per_frame;
    validate(src_);
  }

  const VideoSource& source() const override { return src_; }

  Frame read(std::size_t index) override {
    require(index < src_.frame_count, ErrorKind::usage,
            "frame index " + std::to_string(index) + " out of range");
    std::vector<unsigned char> buf(frame_bytes(src_));
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(index * buf.size()));
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::size_t>(in_.gcount()) == buf.size(), ErrorKind::truncated,
            "frame " + std::to_string(index) + " payload truncated");
    return detail::decode_frame(src_, buf);
  }

 private:
  std::ifstream in_;
  VideoSource src_;
};

inline std::unique_ptr<RawYuvReader> read_raw_yuv(const std::filesystem::path& path, int width,
                                                   int height, FrameRate rate, PixelFormat fmt) {
  return std::make_unique<RawYuvReader>(path, width, height, rate, fmt);
}

// Frames produced on demand by a callback (synthetic sources, benchmarks).
class GeneratedReader final : public FrameReader {
 public:
  GeneratedReader(VideoSource src, std::function<Frame(std::size_t)> generate)
      : src_(src), generate_(std::move(generate)) {
    validate(src_);
  }

  const VideoSource& source() const override { return src_; }
  Frame read(std::size_t index) override {
    require(index < src_.frame_count, ErrorKind::usage, "frame index out of range");
    return generate_(index);
  }

 private:
  VideoSource src_;
  std::function<Frame(std::size_t)> generate_;
};

inline void write_y4m_header(std::ostream& out, const VideoSource& src) {
  require(src.pixel_format != PixelFormat::rgb24, ErrorKind::unsupported,
          "y4m output supports YUV formats only");
  out << kY4mMagic << " W" << src.width << " H" << src.height << " F" << src.frame_rate.num << ':'
      << src.frame_rate.den << " Ip A1:1 C"
      << (src.pixel_format == PixelFormat::yuv420_8bit ? "420jpeg" : "444") << '\n';
}

inline void write_y4m_frame(std::ostream& out, const VideoSource& src, const Frame& frame) {
  const auto bytes = detail::encode_frame(src, frame);
  out << "FRAME\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_y4m(std::ostream& out, const VideoSource& src, std::span<const Frame> frames) {
  write_y4m_header(out, src);
  for (const auto& f : frames) write_y4m_frame(out, src, f);
}

// BT.601 full-range YUV -> RGB. 4:2:0 chroma is upsampled by sample
// duplication. Output is clamped to [0, 255].
inline RgbFrame yuv_to_rgb(const Frame& frame) {
  require(frame.format != PixelFormat::rgb24, ErrorKind::usage, "frame is already RGB");
  const Image& y = frame.planes[0];
  const Image& u = frame.planes[1];
  const Image& v = frame.planes[2];
  const bool sub = frame.format == PixelFormat::yuv420_8bit;
  RgbFrame out{Image(y.rows(), y.cols()), Image(y.rows(), y.cols()), Image(y.rows(), y.cols())};
  for (int i = 0; i < y.rows(); ++i) {
    const int ci = sub ? i / 2 : i;
    for (int j = 0; j < y.cols(); ++j) {
      const int cj = sub ? j / 2 : j;
      const double yy = y(i, j);
      const double cb = u(ci, cj) - 128.0;
      const double cr = v(ci, cj) - 128.0;
      out.r(i, j) = std::clamp(yy + 1.402 * cr, 0.0, 255.0);
      out.g(i, j) = std::clamp(yy - 0.344136 * cb - 0.714136 * cr, 0.0, 255.0);
      out.b(i, j) = std::clamp(yy + 1.772 * cb, 0.0, 255.0);
    }
  }
  return out;
}

inline RgbFrame to_rgb(const Frame& frame) {
  if (frame.format == PixelFormat::rgb24) return {frame.planes[0], frame.planes[1], frame.planes[2]};
  return yuv_to_rgb(frame);
}

// ---------------------------------------------------------------------------
// Chunk schedule
// ---------------------------------------------------------------------------

inline constexpr int kSpatialFramesPerChunk = 2;
inline constexpr int kTemporalFramesPerChunk = 8;

struct ChunkPlan {
  std::size_t start = 0;
  std::size_t length = 0;
  std::array<std::size_t, kSpatialFramesPerChunk> spatial_frame_indices{};
  std::array<std::size_t, kTemporalFramesPerChunk> temporal_frame_indices{};
  std::size_t cnn_frame_index = 0;

  friend bool operator==(const ChunkPlan&, const ChunkPlan&) = default;
};

struct ChunkSchedule {
  std::vector<ChunkPlan> chunks;

  friend bool operator==(const ChunkSchedule&, const ChunkSchedule&) = default;
};

inline std::size_t chunk_length(const FrameRate& rate) {
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(rate.value())));
}

// One chunk per whole second of video (n = round(fps) frames). Within a chunk
// starting at s: spatial frames {s, s + n/2}, temporal frames s..s+7, CNN frame
// s. A chunk is kept only when both its second and its 8-frame temporal group
// fit inside the video.
inline ChunkSchedule build_schedule(const VideoSource& src) {
  const std::size_t n = chunk_length(src.frame_rate);
  const double duration = static_cast<double>(src.frame_count) / src.frame_rate.value();
  require(src.frame_count >= kTemporalFramesPerChunk && duration >= 1.0, ErrorKind::precondition,
          "video too short: " + std::to_string(src.frame_count) + " frames at " +
              std::to_string(src.frame_rate.value()) + " fps (need >= 8 frames and >= 1 second)");
  ChunkSchedule schedule;
  for (std::size_t s = 0; s + n <= src.frame_count && s + kTemporalFramesPerChunk <= src.frame_count;
       s += n) {
    ChunkPlan plan;
    plan.start = s;
    plan.length = n;
    plan.spatial_frame_indices = {s, s + n / 2};
    for (int t = 0; t < kTemporalFramesPerChunk; ++t) plan.temporal_frame_indices[t] = s + t;
    plan.cnn_frame_index = s;
    schedule.chunks.push_back(plan);
  }
  require(!schedule.chunks.empty(), ErrorKind::precondition, "video too short for one chunk");
  return schedule;
}

}  // namespace rapique
