#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rapique/error.hpp"
#include "rapique/filters.hpp"
#include "rapique/image.hpp"
#include "rapique/nss.hpp"

namespace rapique {

// Complete orthonormal Haar basis on `taps` samples (a power of two), rows
// ordered by increasing frequency: DC, then each decomposition level from
// coarse to fine, left to right in time within a level.
//
// Each row is stored as a sign pattern plus a normalizer: row k equals
// sign[k][t] / norm[k]. Responses are computed as (sum of + samples - sum of
// - samples) / norm, so DC-only input gives exact zeros in every band k > 0.
class HaarBank {
 public:
  explicit HaarBank(int taps = 8) : taps_(taps) {
    require(taps >= 2 && (taps & (taps - 1)) == 0, ErrorKind::usage,
            "Haar bank size must be a power of two");
    signs_.push_back(std::vector<int>(taps, 1));
    norms_.push_back(std::sqrt(static_cast<double>(taps)));
    for (int support = taps; support >= 2; support /= 2) {
      for (int start = 0; start < taps; start += support) {
        std::vector<int> s(taps, 0);
        for (int t = 0; t < support / 2; ++t) s[start + t] = 1;
        for (int t = support / 2; t < support; ++t) s[start + t] = -1;
        signs_.push_back(std::move(s));
        norms_.push_back(std::sqrt(static_cast<double>(support)));
      }
    }
  }

  int taps() const noexcept { return taps_; }
  int size() const noexcept { return static_cast<int>(signs_.size()); }

  double tap(int k, int t) const { return signs_[k][t] / norms_[k]; }
  int sign(int k, int t) const { return signs_[k][t]; }
  double norm(int k) const { return norms_[k]; }

  // Dense filter matrix, rows = filters.
  std::vector<std::vector<double>> matrix() const {
    std::vector<std::vector<double>> m(size(), std::vector<double>(taps_));
    for (int k = 0; k < size(); ++k)
      for (int t = 0; t < taps_; ++t) m[k][t] = tap(k, t);
    return m;
  }

 private:
  int taps_;
  std::vector<std::vector<int>> signs_;
  std::vector<double> norms_;
};

inline const HaarBank& haar_bank() {
  static const HaarBank bank(8);
  return bank;
}

// Per-pixel projection of `frames` (one per filter tap, equal shapes) onto
// every filter of `bank`. Result k is the k-th subband image.
inline std::vector<Image> temporal_subbands(std::span<const Image> frames,
                                            const HaarBank& bank = haar_bank()) {
  require(static_cast<int>(frames.size()) == bank.taps(), ErrorKind::geometry,
          "temporal bank needs exactly " + std::to_string(bank.taps()) + " frames");
  for (const auto& f : frames)
    require(f.same_shape(frames[0]), ErrorKind::geometry, "temporal frames differ in shape");
  const std::size_t n = frames[0].size();
  std::vector<Image> out;
  out.reserve(bank.size());
  for (int k = 0; k < bank.size(); ++k) {
    Image band(frames[0].rows(), frames[0].cols());
    for (std::size_t p = 0; p < n; ++p) {
      double pos = 0.0, neg = 0.0;
      for (int t = 0; t < bank.taps(); ++t) {
        const int s = bank.sign(k, t);
        if (s > 0)
          pos += frames[t].values()[p];
        else if (s < 0)
          neg += frames[t].values()[p];
      }
      band.values()[p] = (pos - neg) / bank.norm(k);
    }
    out.push_back(std::move(band));
  }
  return out;
}

inline constexpr int kTemporalBands = 7;  // bands 1..7; DC band 0 is ignored
inline constexpr std::size_t kTemporalDim = kNssDim * kTemporalBands * 2;
static_assert(kTemporalDim == 476);

// Position of (scale, band, slot) inside the temporal vector. scale 0 = full,
// 1 = half; band in 1..7; slot in 0..33.
constexpr std::size_t temporal_index(int scale, int band, std::size_t slot) {
  return static_cast<std::size_t>(scale) * kNssDim * kTemporalBands +
         static_cast<std::size_t>(band - 1) * kNssDim + slot;
}

struct TemporalFeatures {
  std::array<double, kTemporalDim> f{};
  // Degenerate masks indexed [scale][band - 1].
  std::array<std::array<std::uint32_t, kTemporalBands>, 2> degenerate_mask{};

  std::size_t degenerate_fits() const {
    std::size_t n = 0;
    for (const auto& s : degenerate_mask)
      for (auto m : s) n += m & 0xFFFu ? 1 : 0;
    return n;
  }
};

// NSS-34 of bandpass subbands 1..7 at full and half scale. `bands` holds the
// seven subbands in order (band 1 first). `run` executes the 14 independent
// fit tasks; the default runs them serially.
template <typename Runner>
TemporalFeatures temporal_nss(std::span<const Image> bands, const NssParams& p, Runner&& run) {
  require(bands.size() == static_cast<std::size_t>(kTemporalBands), ErrorKind::geometry,
          "temporal NSS expects 7 bandpass images");
  TemporalFeatures out;
  std::array<NssResult, 2 * kTemporalBands> results;
  run(results.size(), [&](std::size_t task) {
    const int scale = static_cast<int>(task / kTemporalBands);
    const std::size_t band = task % kTemporalBands;
    results[task] = scale == 0 ? nss34(bands[band], p) : nss34(half_scale(bands[band]), p);
  });
  for (int scale = 0; scale < 2; ++scale)
    for (int band = 1; band <= kTemporalBands; ++band) {
      const auto& r = results[scale * kTemporalBands + band - 1];
      std::copy(r.f.begin(), r.f.end(), out.f.begin() + temporal_index(scale, band, 0));
      out.degenerate_mask[scale][band - 1] = r.degenerate_mask;
    }
  return out;
}

inline TemporalFeatures temporal_nss(std::span<const Image> bands, const NssParams& p = {}) {
  return temporal_nss(bands, p, [](std::size_t n, auto&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  });
}

}  // namespace rapique
