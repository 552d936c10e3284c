#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "rapique/image.hpp"

namespace rapique {

// Copy of `in` extended by `pad_r` rows and `pad_c` columns on each side with
// symmetric reflection.
inline Image pad_symmetric(const Image& in, int pad_r, int pad_c) {
  Image out(in.rows() + 2 * pad_r, in.cols() + 2 * pad_c);
  for (int i = 0; i < out.rows(); ++i) {
    const double* src = in.row(mirror_index(i - pad_r, in.rows()));
    double* dst = out.row(i);
    for (int j = 0; j < out.cols(); ++j) dst[j] = src[mirror_index(j - pad_c, in.cols())];
  }
  return out;
}

// 2D convolution (kernel flipped) with an odd-sized kernel and symmetric
// boundary padding. Output has the input's shape.
inline Image convolve2d(const Image& in, const Image& kernel) {
  const int kr = kernel.rows() / 2, kc = kernel.cols() / 2;
  const Image padded = pad_symmetric(in, kr, kc);
  Image out(in.rows(), in.cols());
  for (int i = 0; i < in.rows(); ++i) {
    double* dst = out.row(i);
    for (int a = 0; a < kernel.rows(); ++a) {
      // out(i,j) += K(a,b) * in(i + kr - a, j + kc - b)
      const double* src = padded.row(i + 2 * kr - a);
      for (int b = 0; b < kernel.cols(); ++b) {
        const double w = kernel(a, b);
        if (w == 0.0) continue;
        const double* s = src + 2 * kc - b;
        for (int j = 0; j < in.cols(); ++j) dst[j] += w * s[j];
      }
    }
  }
  return out;
}

// Separable convolution: `vertical` along rows (i), then `horizontal` along
// columns (j). Both kernels odd-length.
inline Image convolve_separable(const Image& in, std::span<const double> vertical,
                                std::span<const double> horizontal) {
  const int rv = static_cast<int>(vertical.size()) / 2;
  const int rh = static_cast<int>(horizontal.size()) / 2;
  const int rows = in.rows(), cols = in.cols();

  Image tmp(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double* dst = tmp.row(i);
    for (std::size_t a = 0; a < vertical.size(); ++a) {
      const double w = vertical[a];
      const double* s = in.row(mirror_index(i + rv - static_cast<int>(a), rows));
      for (int j = 0; j < cols; ++j) dst[j] += w * s[j];
    }
  }
  Image out(rows, cols);
  std::vector<double> line(static_cast<std::size_t>(cols + 2 * rh));
  for (int i = 0; i < rows; ++i) {
    const double* s = tmp.row(i);
    for (int j = 0; j < cols + 2 * rh; ++j) line[j] = s[mirror_index(j - rh, cols)];
    double* dst = out.row(i);
    for (std::size_t b = 0; b < horizontal.size(); ++b) {
      const double w = horizontal[b];
      const double* l = line.data() + 2 * rh - static_cast<int>(b);
      for (int j = 0; j < cols; ++j) dst[j] += w * l[j];
    }
  }
  return out;
}

// Sampled 1D Gaussian of the given radius, normalized to unit sum.
inline std::vector<double> gaussian_kernel_1d(double sigma, int radius) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int x = -radius; x <= radius; ++x) {
    k[x + radius] = std::exp(-0.5 * x * x / (sigma * sigma));
    sum += k[x + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// ---------------------------------------------------------------------------
// Bicubic resampling
// ---------------------------------------------------------------------------

namespace detail {

// Catmull-Rom (a = -0.5) cubic.
inline double cubic(double x) {
  const double ax = std::abs(x), ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

struct AxisWeights {
  int taps = 0;
  std::vector<int> index;      // out_len * taps
  std::vector<double> weight;  // out_len * taps
};

// Interpolation weights mapping in_len samples to out_len. When shrinking the
// kernel is stretched by 1/scale so it also acts as the anti-alias prefilter.
inline AxisWeights axis_weights(int in_len, int out_len) {
  const double scale = static_cast<double>(out_len) / in_len;
  const bool shrink = scale < 1.0;
  const double width = shrink ? 4.0 / scale : 4.0;
  AxisWeights aw;
  aw.taps = static_cast<int>(std::ceil(width)) + 2;
  aw.index.resize(static_cast<std::size_t>(out_len) * aw.taps);
  aw.weight.resize(aw.index.size());
  for (int o = 0; o < out_len; ++o) {
    const double u = (o + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double sum = 0.0;
    for (int p = 0; p < aw.taps; ++p) {
      const double d = u - (left + p);
      const double w = shrink ? scale * cubic(scale * d) : cubic(d);
      aw.index[o * aw.taps + p] = mirror_index(left + p, in_len);
      aw.weight[o * aw.taps + p] = w;
      sum += w;
    }
    for (int p = 0; p < aw.taps; ++p) aw.weight[o * aw.taps + p] /= sum;
  }
  return aw;
}

}  // namespace detail

inline Image resize_bicubic(const Image& in, int out_rows, int out_cols) {
  if (out_rows == in.rows() && out_cols == in.cols()) return in;
  const auto wc = detail::axis_weights(in.cols(), out_cols);
  const auto wr = detail::axis_weights(in.rows(), out_rows);

  Image horiz(in.rows(), out_cols);
  for (int i = 0; i < in.rows(); ++i) {
    const double* s = in.row(i);
    double* d = horiz.row(i);
    for (int o = 0; o < out_cols; ++o) {
      double acc = 0.0;
      const int* idx = &wc.index[static_cast<std::size_t>(o) * wc.taps];
      const double* w = &wc.weight[static_cast<std::size_t>(o) * wc.taps];
      for (int p = 0; p < wc.taps; ++p) acc += w[p] * s[idx[p]];
      d[o] = acc;
    }
  }
  Image out(out_rows, out_cols);
  for (int o = 0; o < out_rows; ++o) {
    double* d = out.row(o);
    for (int p = 0; p < wr.taps; ++p) {
      const double w = wr.weight[static_cast<std::size_t>(o) * wr.taps + p];
      if (w == 0.0) continue;
      const double* s = horiz.row(wr.index[static_cast<std::size_t>(o) * wr.taps + p]);
      for (int j = 0; j < out_cols; ++j) d[j] += w * s[j];
    }
  }
  return out;
}

// Bicubic half-scale image, ceil(rows/2) x ceil(cols/2).
inline Image half_scale(const Image& in) {
  return resize_bicubic(in, (in.rows() + 1) / 2, (in.cols() + 1) / 2);
}

}  // namespace rapique
