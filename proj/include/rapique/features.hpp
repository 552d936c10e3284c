#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapique/binary_io.hpp"
#include "rapique/config.hpp"
#include "rapique/deep_features.hpp"
#include "rapique/nss.hpp"
#include "rapique/parallel.hpp"
#include "rapique/pixel_maps.hpp"
#include "rapique/temporal.hpp"
#include "rapique/video_io.hpp"

namespace rapique {

// Spatial block: luma maps at two scales, chroma maps at half scale only.
inline constexpr std::size_t kLumaBlockDim = kNssDim * 2 * kLumaMaps.size();
inline constexpr std::size_t kChromaBlockDim = kNssDim * 1 * kChromaMaps.size();
inline constexpr std::size_t kSpatialDim = kLumaBlockDim + kChromaBlockDim;
static_assert(kLumaBlockDim == 272 && kChromaBlockDim == 408 && kSpatialDim == 680);

// Video vector layout: [spatial_avg | spatial_absdiff | temporal | deep].
inline constexpr std::size_t kSpatialAvgOffset = 0;
inline constexpr std::size_t kSpatialAbsdiffOffset = kSpatialDim;
inline constexpr std::size_t kTemporalOffset = 2 * kSpatialDim;
inline constexpr std::size_t kDeepOffset = kTemporalOffset + kTemporalDim;
inline constexpr std::size_t kNssBlockDim = kDeepOffset;
inline constexpr std::size_t kVideoDim = kDeepOffset + kDeepDim;
static_assert(kDeepOffset == 1836 && kVideoDim == 3884);

struct MapFitFlags {
  MapLabel label;
  MapScale scale;
  std::uint32_t mask;
};

struct SpatialFeatures {
  std::array<double, kSpatialDim> f{};
  std::vector<MapFitFlags> flags;  // one entry per map, layout order
};

// 20 maps in layout order: full-scale Y, GM, LoG, DoG; half-scale Y, GM,
// LoG, DoG; then the 12 half-scale chroma maps.
template <typename Runner>
SpatialFeatures spatial_features(const RgbFrame& frame, const NssParams& p, Runner&& run) {
  const RgbFrame half = half_scale(frame);
  std::vector<FeatureMap> maps = build_luma_maps(frame, MapScale::full);
  for (auto& m : build_all_maps(half, MapScale::half)) maps.push_back(std::move(m));

  std::vector<NssResult> results(maps.size());
  run(maps.size(), [&](std::size_t i) { results[i] = nss34(maps[i].data, p); });

  SpatialFeatures out;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    std::copy(results[i].f.begin(), results[i].f.end(), out.f.begin() + i * kNssDim);
    out.flags.push_back({maps[i].label, maps[i].scale, results[i].degenerate_mask});
  }
  return out;
}

inline SpatialFeatures spatial_features(const RgbFrame& frame, const NssParams& p = {}) {
  return spatial_features(frame, p, ParallelRunner{1});
}

struct PooledSpatial {
  std::array<double, kSpatialDim> avg{};
  std::array<double, kSpatialDim> absdiff{};
};

inline PooledSpatial pool_chunk_spatial(std::span<const double, kSpatialDim> a,
                                        std::span<const double, kSpatialDim> b) {
  PooledSpatial out;
  for (std::size_t k = 0; k < kSpatialDim; ++k) {
    out.avg[k] = 0.5 * (a[k] + b[k]);
    out.absdiff[k] = std::abs(a[k] - b[k]);
  }
  return out;
}

struct ChunkFeatures {
  std::array<std::array<double, kSpatialDim>, 2> spatial{};
  std::array<double, kTemporalDim> temporal{};
  std::vector<double> deep;
};

struct VideoFeatureVector {
  std::vector<double> values;

  std::size_t deep_dim() const { return values.size() - kNssBlockDim; }
  std::span<const double> spatial_avg() const {
    return std::span(values).subspan(kSpatialAvgOffset, kSpatialDim);
  }
  std::span<const double> spatial_absdiff() const {
    return std::span(values).subspan(kSpatialAbsdiffOffset, kSpatialDim);
  }
  std::span<const double> temporal() const {
    return std::span(values).subspan(kTemporalOffset, kTemporalDim);
  }
  std::span<const double> deep() const { return std::span(values).subspan(kDeepOffset); }
};

// Mean over chunks of each block, concatenated in the frozen order.
inline VideoFeatureVector assemble_video(std::span<const ChunkFeatures> chunks) {
  require(!chunks.empty(), ErrorKind::precondition, "assemble_video needs at least one chunk");
  const std::size_t deep_dim = chunks[0].deep.size();
  VideoFeatureVector out;
  out.values.assign(kNssBlockDim + deep_dim, 0.0);
  for (const auto& c : chunks) {
    require(c.deep.size() == deep_dim, ErrorKind::geometry, "chunks differ in deep dimension");
    const auto pooled = pool_chunk_spatial(c.spatial[0], c.spatial[1]);
    for (std::size_t k = 0; k < kSpatialDim; ++k) {
      out.values[kSpatialAvgOffset + k] += pooled.avg[k];
      out.values[kSpatialAbsdiffOffset + k] += pooled.absdiff[k];
    }
    for (std::size_t k = 0; k < kTemporalDim; ++k) out.values[kTemporalOffset + k] += c.temporal[k];
    for (std::size_t k = 0; k < deep_dim; ++k) out.values[kDeepOffset + k] += c.deep[k];
  }
  for (double& v : out.values) v /= static_cast<double>(chunks.size());
  return out;
}

// ---------------------------------------------------------------------------
// Whole-video extraction
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> kStageNames = {
    "decode", "spatial_nss", "spatial_nss_var", "temporal_nss", "deep_ingest", "total"};

enum Stage : std::size_t { kDecode, kSpatialNss, kSpatialNssVar, kTemporalNss, kDeepIngest, kTotal };

struct StageTimings {
  std::array<double, kStageNames.size()> seconds{};

  double stage_sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < kTotal; ++i) s += seconds[i];
    return s;
  }
};

struct ExtractionMetadata {
  VideoSource source;
  std::size_t chunks = 0;
  StageTimings timings;
  std::vector<std::string> warnings;
  bool deep_zero_filled = false;
  // Count of degenerate NSS-34 fits per "<scale>/<map>" (spatial) or
  // "<scale>/band<k>" (temporal), summed over frames and chunks.
  std::map<std::string, std::size_t> spatial_degenerate;
  std::map<std::string, std::size_t> temporal_degenerate;
  nlohmann::json config;
};

struct ExtractionResult {
  VideoFeatureVector features;
  ExtractionMetadata meta;
};

struct ExtractOptions {
  Config config;
  std::optional<std::filesystem::path> deep_sidecar;  // nullopt = zero-fill deep block
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  StageClock(const StageClock&) = delete;
  StageClock& operator=(const StageClock&) = delete;

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline ExtractionResult extract_video(FrameReader& reader, const ChunkSchedule& schedule,
                                      const ExtractOptions& opts) {
  validate(opts.config);
  require(!schedule.chunks.empty(), ErrorKind::precondition, "empty chunk schedule");
  const auto& src = reader.source();
  for (const auto& c : schedule.chunks)
    require(c.temporal_frame_indices.back() < src.frame_count &&
                c.spatial_frame_indices.back() < src.frame_count,
            ErrorKind::alignment, "schedule references frames beyond the video");

  const ParallelRunner runner{opts.config.effective_threads()};
  const NssParams& nss = opts.config.nss;
  const int target = opts.config.resize_short_side;

  ExtractionResult result;
  auto& meta = result.meta;
  meta.source = src;
  meta.chunks = schedule.chunks.size();
  meta.config = to_json(opts.config);
  auto& t = meta.timings.seconds;
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<DeepFeatures> deep;
  if (opts.deep_sidecar) {
    detail::StageClock clock(t[kDeepIngest]);
    deep = read_deep_features(*opts.deep_sidecar, schedule.chunks.size());
  } else {
    meta.deep_zero_filled = true;
    meta.warnings.push_back("deep features disabled: deep block zero-filled (" +
                            std::to_string(opts.config.deep_dim) + " dims)");
  }

  std::vector<ChunkFeatures> chunks(schedule.chunks.size());
  for (std::size_t ci = 0; ci < schedule.chunks.size(); ++ci) {
    const auto& plan = schedule.chunks[ci];
    auto& cf = chunks[ci];

    std::array<Frame, kTemporalFramesPerChunk> temporal_frames;
    std::array<Frame, kSpatialFramesPerChunk> spatial_frames;
    {
      detail::StageClock clock(t[kDecode]);
      for (int k = 0; k < kTemporalFramesPerChunk; ++k)
        temporal_frames[k] = reader.read(plan.temporal_frame_indices[k]);
      for (int k = 0; k < kSpatialFramesPerChunk; ++k) {
        const std::size_t idx = plan.spatial_frame_indices[k];
        if (idx >= plan.temporal_frame_indices.front() && idx <= plan.temporal_frame_indices.back())
          spatial_frames[k] = temporal_frames[idx - plan.temporal_frame_indices.front()];
        else
          spatial_frames[k] = reader.read(idx);
      }
    }

    {
      detail::StageClock clock(t[kSpatialNss]);
      for (int k = 0; k < kSpatialFramesPerChunk; ++k) {
        const RgbFrame rgb = resize_keep_aspect(to_rgb(spatial_frames[k]), target);
        const SpatialFeatures sf = spatial_features(rgb, nss, runner);
        cf.spatial[k] = sf.f;
        for (const auto& fl : sf.flags)
          if (fl.mask & 0xFFFu)
            ++meta.spatial_degenerate[std::string(to_string(fl.scale)) + "/" +
                                      std::string(to_string(fl.label))];
      }
    }

    {
      detail::StageClock clock(t[kTemporalNss]);
      std::vector<Image> luma_frames(kTemporalFramesPerChunk);
      runner(luma_frames.size(), [&](std::size_t k) {
        const Frame& f = temporal_frames[k];
        const Image y = f.format == PixelFormat::rgb24 ? luma(to_rgb(f)) : f.planes[0];
        luma_frames[k] = resize_keep_aspect(y, target);
      });
      auto bands = temporal_subbands(luma_frames);
      const TemporalFeatures tf =
          temporal_nss(std::span<const Image>(bands).subspan(1), nss, runner);
      cf.temporal = tf.f;
      for (int s = 0; s < 2; ++s)
        for (int b = 0; b < kTemporalBands; ++b)
          if (tf.degenerate_mask[s][b] & 0xFFFu)
            ++meta.temporal_degenerate[std::string(s == 0 ? "full" : "half") + "/band" +
                                       std::to_string(b + 1)];
    }

    {
      detail::StageClock clock(t[kDeepIngest]);
      if (deep)
        cf.deep.assign(deep->rows[ci].begin(), deep->rows[ci].end());
      else
        cf.deep.assign(opts.config.deep_dim, 0.0);
    }
  }

  {
    // Average / absolute-difference pooling and the cross-chunk mean.
    detail::StageClock clock(t[kSpatialNssVar]);
    result.features = assemble_video(chunks);
  }
  t[kTotal] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline ExtractionResult extract_video(FrameReader& reader, const ExtractOptions& opts) {
  return extract_video(reader, build_schedule(reader.source()), opts);
}

// ---------------------------------------------------------------------------
// FTV1 feature files
// ---------------------------------------------------------------------------

inline constexpr std::string_view kFeatureMagic = "FTV1";

// "FTV1" | u32 LE dim | dim f32 LE values
inline std::vector<unsigned char> encode_feature_file(std::span<const double> values) {
  std::vector<unsigned char> out;
  out.reserve(8 + values.size() * 4);
  binary::put_magic(out, kFeatureMagic);
  binary::put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) binary::put_f32(out, static_cast<float>(v));
  return out;
}

inline std::vector<double> decode_feature_file(const std::vector<unsigned char>& bytes) {
  binary::Reader r(bytes, "FTV1");
  require(r.remaining() >= 8, ErrorKind::parse, "FTV1: header truncated");
  const std::string magic = r.magic(4);
  require(magic == kFeatureMagic, ErrorKind::parse, "FTV1: bad magic '" + magic + "'");
  const std::uint32_t dim = r.u32();
  require(r.remaining() == static_cast<std::size_t>(dim) * 4, ErrorKind::parse,
          "FTV1: payload size does not match dim " + std::to_string(dim));
  std::vector<double> out(dim);
  for (auto& v : out) {
    v = r.f32();
    require(std::isfinite(v), ErrorKind::data, "FTV1: non-finite feature value");
  }
  return out;
}

inline std::vector<double> read_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(binary::read_file(path));
}

inline std::filesystem::path metadata_path(std::filesystem::path feature_path) {
  return feature_path.replace_extension(".meta.json");
}

inline nlohmann::json layout_json(std::size_t deep_dim) {
  return {{"order", {"spatial_avg", "spatial_absdiff", "temporal", "deep"}},
          {"spatial_avg", {kSpatialAvgOffset, kSpatialDim}},
          {"spatial_absdiff", {kSpatialAbsdiffOffset, kSpatialDim}},
          {"temporal", {kTemporalOffset, kTemporalDim}},
          {"deep", {kDeepOffset, deep_dim}}};
}

inline nlohmann::json to_json(const ExtractionMetadata& m, std::size_t dim) {
  nlohmann::json timings = nlohmann::json::object();
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    timings[std::string(kStageNames[i])] = m.timings.seconds[i];
  return {
      {"dim", dim},
      {"layout", layout_json(dim - kNssBlockDim)},
      {"source", {{"width", m.source.width}, {"height", m.source.height},
                  {"frame_rate", {m.source.frame_rate.num, m.source.frame_rate.den}},
                  {"frame_count", m.source.frame_count},
                  {"pixel_format", to_string(m.source.pixel_format)}}},
      {"chunks", m.chunks},
      {"timings_seconds", timings},
      {"deep_zero_filled", m.deep_zero_filled},
      {"warnings", m.warnings},
      {"degenerate_fits", {{"spatial", m.spatial_degenerate}, {"temporal", m.temporal_degenerate}}},
      {"filters", {{"log_window", kLogWindow}, {"log_sigma", kLogSigma},
                   {"dog_sigma1", kDogSigma1}, {"dog_sigma2", kDogSigma2},
                   {"dog_window", 2 * kDogRadius + 1}}},
      {"config", m.config},
  };
}

inline void write_features(const std::filesystem::path& path, const ExtractionResult& r) {
  binary::write_file(path, encode_feature_file(r.features.values));
  binary::write_text(metadata_path(path), to_json(r.meta, r.features.values.size()).dump(2) + "\n");
}

}  // namespace rapique
