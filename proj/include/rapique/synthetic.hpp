#pragma once

#include <cstdint>
#include <memory>

#include "rapique/random.hpp"
#include "rapique/video_io.hpp"

namespace rapique {

// Uniform 8-bit noise video. Every frame is a pure function of (seed, index),
// so frames can be read in any order.
inline std::unique_ptr<FrameReader> noise_video(int width, int height, FrameRate fps,
                                                std::size_t frames, std::uint64_t seed = 0,
                                                PixelFormat format = PixelFormat::yuv420_8bit) {
  const VideoSource src{width, height, fps, frames, format};
  return std::make_unique<GeneratedReader>(src, [src, seed](std::size_t index) {
    Frame f;
    f.format = src.pixel_format;
    Rng rng(derive_seed(seed, index));
    for (int p = 0; p < 3; ++p) {
      const bool sub = p > 0 && src.pixel_format == PixelFormat::yuv420_8bit;
      Image& img = f.planes[p];
      img = Image(sub ? chroma_height(src) : src.height, sub ? chroma_width(src) : src.width);
      auto v = img.values();
      std::size_t i = 0;
      while (i < v.size()) {
        std::uint64_t bits = rng.next();
        for (int b = 0; b < 8 && i < v.size(); ++b, bits >>= 8) v[i++] = static_cast<double>(bits & 0xFF);
      }
    }
    return f;
  });
}

}  // namespace rapique
