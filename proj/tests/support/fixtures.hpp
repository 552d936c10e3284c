#pragma once

// Shared test fixtures: temp directories, synthetic images and videos.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rapique/rapique.hpp"

namespace rqtest {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("rapique_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline rapique::Image random_image(int rows, int cols, std::uint64_t seed, double lo = 0.0,
                                   double hi = 255.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  rapique::Image img(rows, cols);
  for (auto& v : img.values()) v = d(gen);
  return img;
}

// Integer-valued image, so offsets and shifts stay exact in double.
inline rapique::Image random_int_image(int rows, int cols, std::uint64_t seed, int lo = 0,
                                       int hi = 255) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> d(lo, hi);
  rapique::Image img(rows, cols);
  for (auto& v : img.values()) v = d(gen);
  return img;
}

inline rapique::Image constant_image(int rows, int cols, double value) {
  rapique::Image img(rows, cols);
  for (auto& v : img.values()) v = value;
  return img;
}

inline rapique::RgbFrame constant_rgb(int rows, int cols, double r, double g, double b) {
  return {constant_image(rows, cols, r), constant_image(rows, cols, g),
          constant_image(rows, cols, b)};
}

inline rapique::RgbFrame random_rgb(int rows, int cols, std::uint64_t seed) {
  return {random_int_image(rows, cols, seed), random_int_image(rows, cols, seed + 1),
          random_int_image(rows, cols, seed + 2)};
}

// Smooth moving-gradient content with a little noise; stays inside [0, 255].
inline rapique::Frame pattern_frame(const rapique::VideoSource& src, std::size_t index,
                                    std::uint64_t seed = 1) {
  using namespace rapique;
  Frame f;
  f.format = src.pixel_format;
  std::mt19937_64 gen(seed * 1000003u + index);
  std::uniform_int_distribution<int> noise(-6, 6);
  const bool sub = src.pixel_format == PixelFormat::yuv420_8bit;
  for (int p = 0; p < 3; ++p) {
    const int rows = p > 0 && sub ? chroma_height(src) : src.height;
    const int cols = p > 0 && sub ? chroma_width(src) : src.width;
    f.planes[p] = Image(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const double base = p == 0 ? 128.0 + 80.0 * std::sin(0.11 * (j + 2.0 * index) + 0.07 * i)
                                   : 128.0 + 30.0 * std::cos(0.05 * (i + index) + 0.3 * p);
        f.planes[p](i, j) = std::clamp(std::round(base) + noise(gen), 0.0, 255.0);
      }
  }
  return f;
}

inline std::vector<rapique::Frame> pattern_frames(const rapique::VideoSource& src,
                                                  std::uint64_t seed = 1) {
  std::vector<rapique::Frame> frames;
  for (std::size_t i = 0; i < src.frame_count; ++i) frames.push_back(pattern_frame(src, i, seed));
  return frames;
}

inline void write_pattern_y4m(const fs::path& path, const rapique::VideoSource& src,
                              std::uint64_t seed = 1) {
  std::ofstream out(path, std::ios::binary);
  rapique::write_y4m(out, src, pattern_frames(src, seed));
}

// The shared fixture video: 96x80 4:2:0, 10 fps, 25 frames -> 2 chunks.
inline rapique::VideoSource fixture_source() {
  return {96, 80, {10, 1}, 25, rapique::PixelFormat::yuv420_8bit};
}

inline std::unique_ptr<rapique::FrameReader> fixture_reader(std::uint64_t seed = 1) {
  const auto src = fixture_source();
  return std::make_unique<rapique::GeneratedReader>(
      src, [src, seed](std::size_t i) { return pattern_frame(src, i, seed); });
}

}  // namespace rqtest
