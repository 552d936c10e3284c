#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>
#include <utility>
#include <vector>

#include "rapique/error.hpp"
#include "rapique/filters.hpp"
#include "rapique/image.hpp"
#include "rapique/video_io.hpp"

namespace rapique {

enum class MapLabel {
  Y, GM, LoG, DoG,
  O2, O3, GMO2, GMO3,
  BY, RG, GMBY, GMRG,
  A, B, GMA, GMB,
};

inline constexpr std::array<MapLabel, 4> kLumaMaps = {MapLabel::Y, MapLabel::GM, MapLabel::LoG,
                                                      MapLabel::DoG};
// Chroma block order used by the spatial feature layout.
inline constexpr std::array<MapLabel, 12> kChromaMaps = {
    MapLabel::O2, MapLabel::O3, MapLabel::GMO2, MapLabel::GMO3, MapLabel::BY,  MapLabel::RG,
    MapLabel::GMBY, MapLabel::GMRG, MapLabel::A, MapLabel::B, MapLabel::GMA, MapLabel::GMB};

constexpr std::string_view to_string(MapLabel label) {
  constexpr std::array<std::string_view, 16> names = {
      "Y", "GM", "LoG", "DoG", "O2", "O3", "GMO2", "GMO3",
      "BY", "RG", "GMBY", "GMRG", "A", "B", "GMA", "GMB"};
  return names[static_cast<std::size_t>(label)];
}

enum class MapScale { full, half };

constexpr std::string_view to_string(MapScale s) { return s == MapScale::full ? "full" : "half"; }

struct FeatureMap {
  MapLabel label = MapLabel::Y;
  Image data;
  MapScale scale = MapScale::full;
};

// ---------------------------------------------------------------------------
// Resize policy
// ---------------------------------------------------------------------------

// Output (rows, cols) for the short-side policy. Never upscales; the long side
// is rounded to the nearest even integer.
inline std::pair<int, int> keep_aspect_size(int rows, int cols, int target_short_side) {
  require(target_short_side >= 64, ErrorKind::usage, "resize target must be >= 64");
  const int short_side = std::min(rows, cols);
  if (short_side <= target_short_side) return {rows, cols};
  const int long_side = std::max(rows, cols);
  const double scaled = static_cast<double>(long_side) * target_short_side / short_side;
  const int even = static_cast<int>(2 * std::llround(scaled / 2.0));
  return rows <= cols ? std::pair{target_short_side, even} : std::pair{even, target_short_side};
}

inline Image clamp_pixels(Image img) {
  for (double& v : img.values()) v = std::clamp(v, 0.0, 255.0);
  return img;
}

inline Image resize_keep_aspect(const Image& plane, int target_short_side) {
  const auto [r, c] = keep_aspect_size(plane.rows(), plane.cols(), target_short_side);
  if (r == plane.rows() && c == plane.cols()) return plane;
  return clamp_pixels(resize_bicubic(plane, r, c));
}

inline RgbFrame resize_keep_aspect(const RgbFrame& frame, int target_short_side) {
  return {resize_keep_aspect(frame.r, target_short_side),
          resize_keep_aspect(frame.g, target_short_side),
          resize_keep_aspect(frame.b, target_short_side)};
}

inline RgbFrame half_scale(const RgbFrame& frame) {
  return {clamp_pixels(half_scale(frame.r)), clamp_pixels(half_scale(frame.g)),
          clamp_pixels(half_scale(frame.b))};
}

// ---------------------------------------------------------------------------
// Luma maps
// ---------------------------------------------------------------------------

inline Image luma(const RgbFrame& f) {
  Image y(f.rows(), f.cols());
  for (std::size_t k = 0; k < y.size(); ++k)
    y.values()[k] = 0.299 * f.r.values()[k] + 0.587 * f.g.values()[k] + 0.114 * f.b.values()[k];
  return y;
}

inline const Image& sobel_x() {
  static const Image k = [] {
    Image h(3, 3);
    const double v[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) h(i, j) = v[i][j];
    return h;
  }();
  return k;
}

inline const Image& sobel_y() {
  static const Image k = transpose(sobel_x());
  return k;
}

inline Image gradient_magnitude(const Image& in) {
  require(in.rows() >= 3 && in.cols() >= 3, ErrorKind::precondition,
          "gradient magnitude needs a map of at least 3x3");
  const Image gx = convolve2d(in, sobel_x());
  const Image gy = convolve2d(in, sobel_y());
  Image out(in.rows(), in.cols());
  for (std::size_t k = 0; k < out.size(); ++k)
    out.values()[k] = std::hypot(gx.values()[k], gy.values()[k]);
  return out;
}

inline constexpr int kLogWindow = 9;
inline constexpr double kLogSigma = kLogWindow / 6.0;

// 9x9 sampled Laplacian-of-Gaussian with its mean removed so it sums to zero.
inline const Image& log_kernel() {
  static const Image k = [] {
    const int r = kLogWindow / 2;
    const double s2 = kLogSigma * kLogSigma;
    Image h(kLogWindow, kLogWindow);
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x) {
        const double rr = x * x + y * y;
        h(y + r, x + r) = (rr - 2.0 * s2) / (2.0 * std::numbers::pi * s2 * s2 * s2) *
                          std::exp(-rr / (2.0 * s2));
        sum += h(y + r, x + r);
      }
    const double mean = sum / (kLogWindow * kLogWindow);
    for (double& v : h.values()) v -= mean;
    return h;
  }();
  return k;
}

inline Image log_of_gaussian(const Image& in) {
  require(in.rows() >= kLogWindow && in.cols() >= kLogWindow, ErrorKind::precondition,
          "LoG needs a map of at least 9x9");
  return convolve2d(in, log_kernel());
}

inline constexpr double kDogSigma1 = 1.0;
inline constexpr double kDogSigma2 = 1.6;
inline constexpr int kDogRadius = 5;

// g_sigma1 - g_sigma2, each sampled on 11x11 and normalized to unit sum.
inline Image dog_kernel() {
  const auto g1 = gaussian_kernel_1d(kDogSigma1, kDogRadius);
  const auto g2 = gaussian_kernel_1d(kDogSigma2, kDogRadius);
  const int n = 2 * kDogRadius + 1;
  Image h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = g1[i] * g1[j] - g2[i] * g2[j];
  return h;
}

inline Image difference_of_gaussians(const Image& in) {
  require(in.rows() >= 2 * kDogRadius + 1 && in.cols() >= 2 * kDogRadius + 1,
          ErrorKind::precondition, "DoG needs a map of at least 11x11");
  static const auto g1 = gaussian_kernel_1d(kDogSigma1, kDogRadius);
  static const auto g2 = gaussian_kernel_1d(kDogSigma2, kDogRadius);
  Image a = convolve_separable(in, g1, g1);
  const Image b = convolve_separable(in, g2, g2);
  for (std::size_t k = 0; k < a.size(); ++k) a.values()[k] -= b.values()[k];
  return a;
}

// ---------------------------------------------------------------------------
// Chroma maps
// ---------------------------------------------------------------------------

struct OpponentMaps {
  Image o1, o2, o3;
};

inline OpponentMaps opponent_color(const RgbFrame& f) {
  OpponentMaps m{Image(f.rows(), f.cols()), Image(f.rows(), f.cols()), Image(f.rows(), f.cols())};
  for (std::size_t k = 0; k < m.o1.size(); ++k) {
    const double r = f.r.values()[k], g = f.g.values()[k], b = f.b.values()[k];
    m.o1.values()[k] = 0.06 * r + 0.63 * g + 0.27 * b;
    m.o2.values()[k] = 0.30 * r + 0.04 * g - 0.35 * b;
    m.o3.values()[k] = 0.34 * r - 0.60 * g + 0.17 * b;
  }
  return m;
}

struct LogOpponentMaps {
  Image by, rg;
};

inline LogOpponentMaps log_opponent(const RgbFrame& f) {
  const std::size_t n = f.r.size();
  auto log_centered = [n](const Image& c) {
    Image out(c.rows(), c.cols());
    for (std::size_t k = 0; k < n; ++k) out.values()[k] = std::log(c.values()[k] + 0.1);
    // Mean taken relative to the first sample so a constant channel centres to exactly 0.
    const double pivot = out.values()[0];
    double sum = 0.0;
    for (double v : out.values()) sum += v - pivot;
    const double mu = pivot + sum / static_cast<double>(n);
    for (double& v : out.values()) v -= mu;
    return out;
  };
  const Image lr = log_centered(f.r), lg = log_centered(f.g), lb = log_centered(f.b);
  LogOpponentMaps m{Image(f.rows(), f.cols()), Image(f.rows(), f.cols())};
  const double s6 = std::sqrt(6.0), s2 = std::sqrt(2.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = lr.values()[k], g = lg.values()[k], b = lb.values()[k];
    m.by.values()[k] = (r + g - 2.0 * b) / s6;
    m.rg.values()[k] = (r - g) / s2;
  }
  return m;
}

struct LabChroma {
  Image a, b;
};

namespace detail {

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace detail

// sRGB -> CIEXYZ (D65) -> CIELAB, returning the a* and b* channels.
inline LabChroma cielab_chroma(const RgbFrame& f) {
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  LabChroma out{Image(f.rows(), f.cols()), Image(f.rows(), f.cols())};
  for (std::size_t k = 0; k < out.a.size(); ++k) {
    const double r = detail::srgb_to_linear(f.r.values()[k] / 255.0);
    const double g = detail::srgb_to_linear(f.g.values()[k] / 255.0);
    const double b = detail::srgb_to_linear(f.b.values()[k] / 255.0);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = detail::lab_f(x / xn), fy = detail::lab_f(y / yn), fz = detail::lab_f(z / zn);
    out.a.values()[k] = 500.0 * (fx - fy);
    out.b.values()[k] = 200.0 * (fy - fz);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Map sets
// ---------------------------------------------------------------------------

inline std::vector<FeatureMap> build_luma_maps(const RgbFrame& frame, MapScale scale) {
  Image y = luma(frame);
  std::vector<FeatureMap> maps;
  maps.reserve(4);
  maps.push_back({MapLabel::GM, gradient_magnitude(y), scale});
  maps.push_back({MapLabel::LoG, log_of_gaussian(y), scale});
  maps.push_back({MapLabel::DoG, difference_of_gaussians(y), scale});
  maps.insert(maps.begin(), FeatureMap{MapLabel::Y, std::move(y), scale});
  return maps;
}

inline std::vector<FeatureMap> build_chroma_maps(const RgbFrame& frame, MapScale scale) {
  auto opp = opponent_color(frame);
  auto lop = log_opponent(frame);
  auto lab = cielab_chroma(frame);
  std::vector<FeatureMap> maps;
  maps.reserve(12);
  // Emitted in the frozen chroma order (O2, O3, GMO2, GMO3, ...).
  Image gm_o2 = gradient_magnitude(opp.o2), gm_o3 = gradient_magnitude(opp.o3);
  maps.push_back({MapLabel::O2, std::move(opp.o2), scale});
  maps.push_back({MapLabel::O3, std::move(opp.o3), scale});
  maps.push_back({MapLabel::GMO2, std::move(gm_o2), scale});
  maps.push_back({MapLabel::GMO3, std::move(gm_o3), scale});
  Image gm_by = gradient_magnitude(lop.by), gm_rg = gradient_magnitude(lop.rg);
  maps.push_back({MapLabel::BY, std::move(lop.by), scale});
  maps.push_back({MapLabel::RG, std::move(lop.rg), scale});
  maps.push_back({MapLabel::GMBY, std::move(gm_by), scale});
  maps.push_back({MapLabel::GMRG, std::move(gm_rg), scale});
  Image gm_a = gradient_magnitude(lab.a), gm_b = gradient_magnitude(lab.b);
  maps.push_back({MapLabel::A, std::move(lab.a), scale});
  maps.push_back({MapLabel::B, std::move(lab.b), scale});
  maps.push_back({MapLabel::GMA, std::move(gm_a), scale});
  maps.push_back({MapLabel::GMB, std::move(gm_b), scale});
  return maps;
}

// The 16 maps: Y, GM, LoG, DoG followed by the 12 chroma maps.
inline std::vector<FeatureMap> build_all_maps(const RgbFrame& frame,
                                              MapScale scale = MapScale::full) {
  auto maps = build_luma_maps(frame, scale);
  auto chroma = build_chroma_maps(frame, scale);
  for (auto& m : chroma) maps.push_back(std::move(m));
  return maps;
}

}  // namespace rapique
