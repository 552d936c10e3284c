#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rapique/error.hpp"
#include "rapique/filters.hpp"
#include "rapique/image.hpp"

namespace rapique {

// Local normalization window: (2*radius+1)^2 truncated Gaussian of std
// window_sigma, renormalized to unit volume. c stabilizes the division.
struct NssParams {
  double c = 1.0;
  int radius = 3;
  double window_sigma = 7.0 / 6.0;
};

struct MscnResult {
  Image mscn;
  Image mu;
  Image sigma;
};

// Mean-subtracted contrast-normalized coefficients. The map is first shifted
// by its minimum; the shift cancels in both numerator and the local spread,
// so adding a constant to the input leaves the output unchanged.
inline MscnResult mscn(const Image& map, const NssParams& p = {}) {
  const int window = 2 * p.radius + 1;
  require(map.rows() >= window && map.cols() >= window, ErrorKind::precondition,
          "MSCN needs a map at least as large as its window");
  const auto w = gaussian_kernel_1d(p.window_sigma, p.radius);
  const double offset = *std::min_element(map.values().begin(), map.values().end());

  Image shifted(map.rows(), map.cols());
  Image squared(map.rows(), map.cols());
  for (std::size_t k = 0; k < map.size(); ++k) {
    const double v = map.values()[k] - offset;
    shifted.values()[k] = v;
    squared.values()[k] = v * v;
  }
  Image mu = convolve_separable(shifted, w, w);
  const Image second = convolve_separable(squared, w, w);

  MscnResult r{Image(map.rows(), map.cols()), Image(map.rows(), map.cols()),
               Image(map.rows(), map.cols())};
  for (std::size_t k = 0; k < map.size(); ++k) {
    const double m = mu.values()[k];
    const double s = std::sqrt(std::max(0.0, second.values()[k] - m * m));
    r.sigma.values()[k] = s;
    r.mscn.values()[k] = (shifted.values()[k] - m) / (s + p.c);
    r.mu.values()[k] = m + offset;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Generalized Gaussian moment matching
// ---------------------------------------------------------------------------

struct GgdParams {
  double alpha = 2.0;
  double sigma = 0.0;
};

struct AggdParams {
  double nu = 2.0;
  double eta = 0.0;
  double sigma_l = 0.0;
  double sigma_r = 0.0;
};

inline constexpr std::size_t kMinFitSamples = 64;

// Uniform grid of shape values over [0.05, 20] in steps of 1e-3, tabulating
// the moment ratio r(a) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)), which
// increases with a.
class ShapeGrid {
 public:
  static constexpr double kMin = 0.05;
  static constexpr double kMax = 20.0;
  static constexpr double kStep = 1e-3;
  static constexpr std::size_t kPoints = 19951;  // (kMax - kMin) / kStep + 1

  static const ShapeGrid& instance() {
    static const ShapeGrid grid;
    return grid;
  }

  static double ratio(double a) {
    return std::exp(2.0 * std::lgamma(2.0 / a) - std::lgamma(1.0 / a) - std::lgamma(3.0 / a));
  }

  // Shape whose ratio equals `r`, clamped to the grid range; linear
  // interpolation between the bracketing grid points.
  double invert(double r) const {
    if (!(r > ratio_.front())) return shape_.front();
    if (r >= ratio_.back()) return shape_.back();
    const auto it = std::upper_bound(ratio_.begin(), ratio_.end(), r);
    const std::size_t hi = static_cast<std::size_t>(it - ratio_.begin());
    const std::size_t lo = hi - 1;
    const double t = (r - ratio_[lo]) / (ratio_[hi] - ratio_[lo]);
    return shape_[lo] + t * (shape_[hi] - shape_[lo]);
  }

  std::span<const double> shapes() const { return shape_; }
  std::span<const double> ratios() const { return ratio_; }

 private:
  ShapeGrid() : shape_(kPoints), ratio_(kPoints) {
    for (std::size_t i = 0; i < kPoints; ++i) {
      shape_[i] = kMin + kStep * static_cast<double>(i);
      ratio_[i] = ratio(shape_[i]);
    }
  }

  std::vector<double> shape_;
  std::vector<double> ratio_;
};

inline GgdParams fit_ggd(std::span<const double> x) {
  require(x.size() >= kMinFitSamples, ErrorKind::precondition,
          "GGD fit needs at least 64 samples");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double v : x) {
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  const double n = static_cast<double>(x.size());
  const double m1 = abs_sum / n, m2 = sq_sum / n;
  require(m2 > 0.0 && std::isfinite(m2), ErrorKind::degenerate, "GGD fit on zero-variance input");
  return {ShapeGrid::instance().invert(m1 * m1 / m2), std::sqrt(m2)};
}

inline AggdParams fit_aggd(std::span<const double> x) {
  require(x.size() >= kMinFitSamples, ErrorKind::precondition,
          "AGGD fit needs at least 64 samples");
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double v : x) {
    if (v < 0.0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0.0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
  }
  require(left_n > 0 && right_n > 0, ErrorKind::degenerate,
          "AGGD fit needs both negative and positive samples");
  const double n = static_cast<double>(x.size());
  const double sl = std::sqrt(left_sq / static_cast<double>(left_n));
  const double sr = std::sqrt(right_sq / static_cast<double>(right_n));
  const double m1 = abs_sum / n;
  const double m2 = (left_sq + right_sq) / n;
  // Asymmetry correction written symmetrically in (sl, sr) so that mirrored
  // samples produce the identical estimate.
  const double sl2 = sl * sl, sr2 = sr * sr;
  const double correction = (sl2 * sl + sr2 * sr) * (sl + sr) / ((sl2 + sr2) * (sl2 + sr2));
  const double nu = ShapeGrid::instance().invert(m1 * m1 / m2 * correction);

  const double beta_scale = std::exp(0.5 * (std::lgamma(1.0 / nu) - std::lgamma(3.0 / nu)));
  const double mean_scale = std::exp(std::lgamma(2.0 / nu) - std::lgamma(1.0 / nu));
  const double eta = (sr * beta_scale - sl * beta_scale) * mean_scale;
  return {nu, eta, sl, sr};
}

// ---------------------------------------------------------------------------
// Neighbourhood statistics
// ---------------------------------------------------------------------------

// H, V, D1 and D2 neighbour products over the valid region (no padding).
inline std::array<Image, 4> paired_products(const Image& y) {
  require(y.rows() >= 2 && y.cols() >= 2, ErrorKind::precondition,
          "paired products need at least 2x2");
  const int m = y.rows(), n = y.cols();
  std::array<Image, 4> out = {Image(m, n - 1), Image(m - 1, n), Image(m - 1, n - 1),
                              Image(m - 1, n - 1)};
  for (int i = 0; i < m; ++i) {
    const double* r0 = y.row(i);
    double* h = out[0].row(i);
    for (int j = 0; j + 1 < n; ++j) h[j] = r0[j] * r0[j + 1];
    if (i + 1 == m) continue;
    const double* r1 = y.row(i + 1);
    double* v = out[1].row(i);
    for (int j = 0; j < n; ++j) v[j] = r0[j] * r1[j];
    double* d1 = out[2].row(i);
    for (int j = 0; j + 1 < n; ++j) d1[j] = r0[j] * r1[j + 1];
    double* d2 = out[3].row(i);
    for (int j = 1; j < n; ++j) d2[j - 1] = r0[j] * r1[j - 1];
  }
  return out;
}

// Seven log-derivative maps of Z = log(|mscn| + 0.1), all evaluated on the
// common interior rows/cols 1..M-2 / 1..N-2.
inline std::array<Image, 7> log_derivatives(const Image& y) {
  require(y.rows() >= 3 && y.cols() >= 3, ErrorKind::precondition,
          "log derivatives need at least 3x3");
  const int m = y.rows(), n = y.cols();
  Image z(m, n);
  for (std::size_t k = 0; k < z.size(); ++k) z.values()[k] = std::log(std::abs(y.values()[k]) + 0.1);

  std::array<Image, 7> d;
  for (auto& img : d) img = Image(m - 2, n - 2);
  for (int i = 1; i + 1 < m; ++i) {
    const double* up = z.row(i - 1);
    const double* c = z.row(i);
    const double* dn = z.row(i + 1);
    for (int j = 1; j + 1 < n; ++j) {
      const int oi = i - 1, oj = j - 1;
      d[0](oi, oj) = c[j + 1] - c[j];
      d[1](oi, oj) = dn[j] - c[j];
      d[2](oi, oj) = dn[j + 1] - c[j];
      d[3](oi, oj) = dn[j - 1] - c[j];
      d[4](oi, oj) = up[j] + dn[j] - c[j - 1] - c[j + 1];
      d[5](oi, oj) = c[j] + dn[j + 1] - c[j + 1] - dn[j];
      d[6](oi, oj) = up[j - 1] + dn[j + 1] - up[j + 1] - dn[j - 1];
    }
  }
  return d;
}

inline constexpr double kSigmaCovCap = 1e6;

struct SigmaFeatures {
  double phi = 0.0;  // mean of the sigma field
  double rho = 0.0;  // (phi / omega)^2, capped at kSigmaCovCap
};

inline SigmaFeatures sigma_features(const Image& sigma) {
  require(!sigma.empty(), ErrorKind::precondition, "sigma map is empty");
  const double phi = mean_of(sigma.values());
  double var = 0.0;
  for (double s : sigma.values()) var += (s - phi) * (s - phi);
  const double omega = std::sqrt(var / static_cast<double>(sigma.size()));
  if (omega == 0.0) return {phi, kSigmaCovCap};
  const double rho = (phi / omega) * (phi / omega);
  return {phi, std::min(rho, kSigmaCovCap)};
}

// ---------------------------------------------------------------------------
// NSS-34
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNssDim = 34;
using Nss34Vector = std::array<double, kNssDim>;

// Bit positions in NssResult::degenerate_mask.
enum NssFit : unsigned {
  kFitMscn = 0,          // f1-f2
  kFitProducts = 1,      // bits 1..4: f5-f20, H V D1 D2
  kFitLogDeriv = 5,      // bits 5..11: f21-f34, D1..D7
  kSigmaCapped = 12,     // f4 hit the sentinel cap
};

struct NssResult {
  Nss34Vector f{};
  std::uint32_t degenerate_mask = 0;

  // True when any distribution fit fell back to its neutral default.
  bool degenerate() const noexcept { return (degenerate_mask & 0xFFFu) != 0; }
};

// f1-f2 GGD(MSCN); f3-f4 sigma field (phi, rho); f5-f20 AGGD (nu, eta,
// sigma_l, sigma_r) for H, V, D1, D2 products; f21-f34 GGD (alpha, sigma) for
// log-derivatives D1..D7. Undefined fits are replaced by the neutral
// defaults (alpha = nu = 2, everything else 0) and flagged.
inline NssResult nss34(const Image& map, const NssParams& p = {}) {
  require(map.rows() >= 16 && map.cols() >= 16, ErrorKind::precondition,
          "NSS-34 needs a map of at least 16x16");
  NssResult out;
  auto ggd_into = [&](std::span<const double> samples, std::size_t slot, unsigned bit) {
    GgdParams g;
    try {
      g = fit_ggd(samples);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      g = GgdParams{};
      out.degenerate_mask |= 1u << bit;
    }
    out.f[slot] = g.alpha;
    out.f[slot + 1] = g.sigma;
  };

  const MscnResult m = mscn(map, p);
  ggd_into(m.mscn.values(), 0, kFitMscn);

  const SigmaFeatures sf = sigma_features(m.sigma);
  out.f[2] = sf.phi;
  out.f[3] = sf.rho;
  if (sf.rho >= kSigmaCovCap) out.degenerate_mask |= 1u << kSigmaCapped;

  const auto products = paired_products(m.mscn);
  for (std::size_t d = 0; d < products.size(); ++d) {
    AggdParams a;
    try {
      a = fit_aggd(products[d].values());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      a = AggdParams{};
      out.degenerate_mask |= 1u << (kFitProducts + d);
    }
    const std::size_t slot = 4 + 4 * d;
    out.f[slot] = a.nu;
    out.f[slot + 1] = a.eta;
    out.f[slot + 2] = a.sigma_l;
    out.f[slot + 3] = a.sigma_r;
  }

  const auto derivs = log_derivatives(m.mscn);
  for (std::size_t d = 0; d < derivs.size(); ++d)
    ggd_into(derivs[d].values(), 20 + 2 * d, static_cast<unsigned>(kFitLogDeriv + d));
  return out;
}

}  // namespace rapique
