#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rapique/temporal.hpp"
#include "support/expect_error.hpp"
#include "support/fixtures.hpp"
#include "support/samplers.hpp"

using namespace rapique;

namespace {

std::vector<Image> frames_from(const std::vector<double>& per_frame_scale, const Image& base) {
  std::vector<Image> out;
  for (double s : per_frame_scale) {
    Image f = base;
    for (double& v : f.values()) v *= s;
    out.push_back(std::move(f));
  }
  return out;
}

double energy(std::span<const Image> imgs) {
  double e = 0.0;
  for (const auto& im : imgs)
    for (double v : im.values()) e += v * v;
  return e;
}

}  // namespace

TEST(HaarBank, Orthonormal) {
  const auto m = haar_bank().matrix();
  ASSERT_EQ(m.size(), 8u);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double dot = 0.0;
      for (int t = 0; t < 8; ++t) dot += m[a][t] * m[b][t];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12) << a << "," << b;
    }
  for (int t = 0; t < 8; ++t) EXPECT_NEAR(m[0][t], 1.0 / std::sqrt(8.0), 1e-15);
}

TEST(HaarBank, RowsOrderedByFrequency) {
  const auto& bank = haar_bank();
  // Sign changes per row: 0 for DC, then 1 for every wavelet; the support
  // halves level by level.
  const int support[8] = {8, 8, 4, 4, 2, 2, 2, 2};
  for (int k = 0; k < 8; ++k) {
    int nz = 0;
    for (int t = 0; t < 8; ++t) nz += bank.sign(k, t) != 0;
    EXPECT_EQ(nz, support[k]) << k;
  }
}

TEST(HaarBank, TwoTapAndBadSize) {
  const HaarBank two(2);
  const Image a = rqtest::random_image(5, 4, 1), b = rqtest::random_image(5, 4, 2);
  const std::vector<Image> fr{a, b};
  const auto bands = temporal_subbands(fr, two);
  ASSERT_EQ(bands.size(), 2u);
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(bands[1].values()[p], (a.values()[p] - b.values()[p]) / std::sqrt(2.0));
    EXPECT_EQ(bands[0].values()[p], (a.values()[p] + b.values()[p]) / std::sqrt(2.0));
  }
  EXPECT_ERROR_KIND(HaarBank(6), ErrorKind::usage);
}

TEST(Subbands, StaticSceneIsExactlyDc) {
  const Image f = rqtest::random_image(9, 11, 3);
  const std::vector<Image> fr(8, f);
  const auto bands = temporal_subbands(fr);
  for (int k = 1; k < 8; ++k)
    for (double v : bands[k].values()) EXPECT_EQ(v, 0.0);
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_NEAR(bands[0].values()[p], std::sqrt(8.0) * f.values()[p], 1e-12);
}

TEST(Subbands, AlternatingSignHitsFinestLevelOnly) {
  const Image f = rqtest::random_image(6, 6, 4, 0.5, 2.0);
  const auto fr = frames_from({1, -1, 1, -1, 1, -1, 1, -1}, f);
  const auto bands = temporal_subbands(fr);
  for (int k = 0; k < 4; ++k)
    for (double v : bands[k].values()) EXPECT_EQ(v, 0.0) << k;
  for (int k = 4; k < 8; ++k)
    for (std::size_t p = 0; p < f.size(); ++p) EXPECT_NEAR(bands[k].values()[p], std::sqrt(2.0) * f.values()[p], 1e-12);
}

TEST(Subbands, EnergyConservationAndLinearity) {
  std::vector<Image> a, b;
  for (int t = 0; t < 8; ++t) {
    a.push_back(rqtest::random_image(12, 10, 10 + t, -50, 50));
    b.push_back(rqtest::random_image(12, 10, 30 + t, -50, 50));
  }
  const auto ba = temporal_subbands(a), bb = temporal_subbands(b);
  EXPECT_NEAR(energy(ba), energy(a), 1e-9 * energy(a));
  std::vector<Image> mix;
  for (int t = 0; t < 8; ++t) {
    Image m = a[t];
    for (std::size_t p = 0; p < m.size(); ++p) m.values()[p] = 2.0 * a[t].values()[p] - 0.5 * b[t].values()[p];
    mix.push_back(std::move(m));
  }
  const auto bm = temporal_subbands(mix);
  for (int k = 0; k < 8; ++k)
    for (std::size_t p = 0; p < mix[0].size(); ++p)
      EXPECT_NEAR(bm[k].values()[p], 2.0 * ba[k].values()[p] - 0.5 * bb[k].values()[p], 1e-10);
}

TEST(Subbands, Errors) {
  std::vector<Image> seven(7, Image(4, 4));
  EXPECT_ERROR_KIND(temporal_subbands(seven), ErrorKind::geometry);
  std::vector<Image> mixed(8, Image(4, 4));
  mixed[5] = Image(4, 5);
  EXPECT_ERROR_KIND(temporal_subbands(mixed), ErrorKind::geometry);
}

TEST(TemporalLayout, IndexEnumeratesEverySlotOnce) {
  std::set<std::size_t> seen;
  for (int scale = 0; scale < 2; ++scale)
    for (int band = 1; band <= 7; ++band)
      for (std::size_t slot = 0; slot < kNssDim; ++slot) {
        const auto idx = temporal_index(scale, band, slot);
        EXPECT_LT(idx, kTemporalDim);
        seen.insert(idx);
      }
  EXPECT_EQ(seen.size(), 476u);
  EXPECT_EQ(temporal_index(0, 1, 0), 0u);
  EXPECT_EQ(temporal_index(0, 7, 33), 237u);
  EXPECT_EQ(temporal_index(1, 1, 0), 238u);
  EXPECT_EQ(temporal_index(1, 7, 33), 475u);
}

TEST(TemporalNss, StaticSceneFlagsEveryBand) {
  const std::vector<Image> fr(8, rqtest::random_image(40, 40, 5, 0, 255));
  const auto bands = temporal_subbands(fr);
  const auto t = temporal_nss(std::span(bands).subspan(1));
  EXPECT_EQ(t.degenerate_fits(), 14u);
  for (const auto& s : t.degenerate_mask)
    for (auto m : s) EXPECT_EQ(m, 0x1FFFu);
  for (double v : t.f) EXPECT_TRUE(std::isfinite(v));
}

TEST(TemporalNss, MatchesPerBandNss) {
  std::vector<Image> fr;
  for (int t = 0; t < 8; ++t) fr.push_back(rqtest::random_image(48, 40, 60 + t, 0, 255));
  const auto bands = temporal_subbands(fr);
  const auto t = temporal_nss(std::span(bands).subspan(1));
  for (int band = 1; band <= 7; ++band) {
    const auto full = nss34(bands[band]);
    const auto half = nss34(half_scale(bands[band]));
    for (std::size_t s = 0; s < kNssDim; ++s) {
      EXPECT_EQ(t.f[temporal_index(0, band, s)], full.f[s]);
      EXPECT_EQ(t.f[temporal_index(1, band, s)], half.f[s]);
    }
  }
}

TEST(TemporalNss, GaussianFramesGiveGaussianBands) {
  // Small-amplitude noise keeps the normalisation constant dominant, so the
  // bandpass MSCN statistics stay close to Gaussian.
  std::vector<Image> fr;
  for (int t = 0; t < 8; ++t) {
    Image im(128, 128);
    const auto g = rqtest::gaussian(im.size(), 90 + t, 0.05);
    std::copy(g.begin(), g.end(), im.values().begin());
    fr.push_back(std::move(im));
  }
  const auto bands = temporal_subbands(fr);
  for (int k = 1; k < 8; ++k) {
    const auto subband_values = bands[k].values();
    const auto g = fit_ggd(subband_values);
    EXPECT_NEAR(g.alpha, 2.0, 0.3) << k;
    EXPECT_NEAR(nss34(bands[k]).f[0], 2.0, 0.3) << k;
  }
}

TEST(TemporalNss, WrongBandCount) {
  std::vector<Image> six(6, Image(32, 32));
  EXPECT_ERROR_KIND(temporal_nss(six), ErrorKind::geometry);
}
