#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapique/binary_io.hpp"
#include "rapique/error.hpp"
#include "rapique/parallel.hpp"
#include "rapique/random.hpp"

namespace rapique {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return std::span(data).subspan(i * cols, cols); }
  std::span<const double> row(std::size_t i) const {
    return std::span(data).subspan(i * cols, cols);
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;                // 1 for zero-variance columns
  std::vector<std::size_t> zero_variance;   // columns whose scale was replaced

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean.assign(x.cols, 0.0);
    s.scale.assign(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(i, j);
    for (double& m : s.mean) m /= static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) {
        const double d = x(i, j) - s.mean[j];
        s.scale[j] += d * d;
      }
    for (std::size_t j = 0; j < x.cols; ++j) {
      s.scale[j] = std::sqrt(s.scale[j] / static_cast<double>(x.rows));
      if (!(s.scale[j] > 0.0)) {
        s.scale[j] = 1.0;
        s.zero_variance.push_back(j);
      }
    }
    return s;
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) apply(x.row(i), out.row(i));
    return out;
  }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline Matrix pairwise_squared_distances(const Matrix& x) {
  Matrix d(x.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i + 1; j < x.rows; ++j) d(i, j) = d(j, i) = squared_distance(x.row(i), x.row(j));
  return d;
}

// ---------------------------------------------------------------------------
// epsilon-SVR dual solver (SMO with second-order working-set selection)
// ---------------------------------------------------------------------------

struct SolverStats {
  std::size_t iterations = 0;
  double kkt_gap = 0.0;  // max violating-pair gap at exit
  bool converged = false;
};

struct SvrSolution {
  std::vector<double> coef;  // alpha_i - alpha_i^*, one per training point
  double rho = 0.0;          // decision = sum coef_i K(x_i, x) - rho
  SolverStats stats;
};

// Solves min 1/2 a'Qa + p'a s.t. y'a = 0, 0 <= a <= C over the 2l doubled
// variables of epsilon-insensitive regression. `kernel` is the l x l Gram
// matrix, `z` the targets. Variables t and t + l share kernel row t; the
// first half has y = +1, the second y = -1. Ill-conditioned problems (large C
// with small gamma) can need many iterations, hence the cap; stats.converged
// reports whether the KKT gap reached `tol`.
inline SvrSolution solve_svr(const Matrix& kernel, std::span<const double> z, double c,
                             double epsilon, double tol = 1e-3, std::size_t max_iter = 0) {
  const std::size_t l = z.size();
  require(kernel.rows == l && kernel.cols == l, ErrorKind::geometry, "kernel size mismatch");
  const std::size_t n = 2 * l;
  if (max_iter == 0) max_iter = std::max<std::size_t>(100'000, 100 * n);
  constexpr double tau = 1e-12;
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Upper half stored as a+ (y=+1), lower half as a- (y=-1).
  std::vector<double> alpha(n, 0.0), grad(n);
  for (std::size_t t = 0; t < l; ++t) {
    grad[t] = epsilon - z[t];
    grad[t + l] = epsilon + z[t];
  }
  std::vector<double> diag(l);
  for (std::size_t t = 0; t < l; ++t) diag[t] = kernel(t, t);
  auto sgn = [&](std::size_t t) { return t < l ? 1.0 : -1.0; };
  auto base = [&](std::size_t t) { return t < l ? t : t - l; };

  std::size_t iter = 0;
  double gap = inf;
  for (; iter < max_iter; ++iter) {
    // i: maximal violator of -y*grad over I_up.
    double gmax = -inf;
    std::size_t i = n;
    for (std::size_t t = 0; t < l; ++t)
      if (alpha[t] < c && -grad[t] >= gmax) gmax = -grad[t], i = t;
    for (std::size_t t = l; t < n; ++t)
      if (alpha[t] > 0.0 && grad[t] >= gmax) gmax = grad[t], i = t;
    if (i == n) {
      gap = 0.0;
      break;
    }
    const std::size_t bi = base(i);
    const double yi = sgn(i);
    const double* ki = &kernel.data[bi * l];
    const double kii = diag[bi];

    // j: second-order selection over I_low.
    double gmax2 = -inf, obj_min = inf;
    std::size_t j = n;
    for (std::size_t t = 0; t < l; ++t) {
      if (alpha[t] <= 0.0) continue;
      gmax2 = std::max(gmax2, grad[t]);
      const double diff = gmax + grad[t];
      if (diff > 0.0) {
        double quad = kii + diag[t] - 2.0 * yi * ki[t];
        if (quad <= 0.0) quad = tau;
        const double obj = -(diff * diff) / quad;
        if (obj <= obj_min) obj_min = obj, j = t;
      }
    }
    for (std::size_t t = l; t < n; ++t) {
      if (alpha[t] >= c) continue;
      const std::size_t bt = t - l;
      gmax2 = std::max(gmax2, -grad[t]);
      const double diff = gmax - grad[t];
      if (diff > 0.0) {
        double quad = kii + diag[bt] + 2.0 * yi * ki[bt];
        if (quad <= 0.0) quad = tau;
        const double obj = -(diff * diff) / quad;
        if (obj <= obj_min) obj_min = obj, j = t;
      }
    }
    gap = gmax + gmax2;
    if (gap < tol || j == n) break;

    const std::size_t bj = base(j);
    const double yj = sgn(j);
    const double qij = yi * yj * ki[bj];
    const double old_i = alpha[i], old_j = alpha[j];
    if (yi != yj) {
      double quad = kii + diag[bj] + 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else if (alpha[j] > c) {
        alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = kii + diag[bj] - 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0, alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = sum;
      }
    }
    // grad_t += Q_ti di + Q_tj dj, with Q_ti = y_t y_i K(t, i).
    const double wi = yi * (alpha[i] - old_i), wj = yj * (alpha[j] - old_j);
    const double* kj = &kernel.data[bj * l];
    for (std::size_t t = 0; t < l; ++t) {
      const double g = wi * ki[t] + wj * kj[t];
      grad[t] += g;
      grad[t + l] -= g;
    }
  }

  // rho from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = sgn(t) * grad[t];
    if (alpha[t] >= c) {
      if (t >= l) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (t < l) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  SvrSolution sol;
  sol.rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
  sol.coef.resize(l);
  for (std::size_t t = 0; t < l; ++t) sol.coef[t] = alpha[t] - alpha[t + l];
  sol.stats.iterations = iter;
  sol.stats.kkt_gap = gap;
  sol.stats.converged = gap < tol;
  return sol;
}

// ---------------------------------------------------------------------------
// Four-parameter logistic
// ---------------------------------------------------------------------------

struct LogisticParams {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 1.0;

  // b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))
  double operator()(double x) const {
    return b2 + (b1 - b2) / (1.0 + std::exp(-(x - b3) / std::abs(b4)));
  }
};

namespace detail {

inline double logistic_sse(const LogisticParams& p, std::span<const double> x,
                           std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - p(x[k]);
    s += r * r;
  }
  return s;
}

// Solves the 4x4 system a * d = b by Gaussian elimination with partial pivoting.
inline bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b,
                   std::array<double, 4>& d) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (!(std::abs(a[piv][col]) > 0.0)) return false;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < 4; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 4; ++k) s -= a[r][k] * d[k];
    d[r] = s / a[r][r];
  }
  return std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

// Levenberg-Marquardt least squares. Initialized at b1 = max(y), b2 = min(y),
// b3 = mean(x), b4 = std(x) / 4; stops at relative SSE change below 1e-8 or
// after 500 iterations. The returned point is never worse than the start.
inline LogisticParams fit_logistic(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::geometry, "logistic fit: length mismatch");
  require(x.size() >= 8, ErrorKind::precondition, "logistic fit needs at least 8 pairs");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  require(*xmin < *xmax, ErrorKind::degenerate, "logistic fit: scores are constant");
  const double n = static_cast<double>(x.size());
  const double xmean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double xvar = 0.0;
  for (double v : x) xvar += (v - xmean) * (v - xmean);
  LogisticParams p{*std::max_element(y.begin(), y.end()), *std::min_element(y.begin(), y.end()),
                   xmean, std::sqrt(xvar / n) / 4.0};
  double sse = detail::logistic_sse(p, x, y);
  double lambda = 1e-3;

  for (int iter = 0; iter < 500; ++iter) {
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    const double s4 = std::abs(p.b4);
    const double sign4 = p.b4 < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double u = (x[k] - p.b3) / s4;
      const double s = 1.0 / (1.0 + std::exp(-u));
      const double ds = s * (1.0 - s) * (p.b1 - p.b2);
      const std::array<double, 4> jac = {s, 1.0 - s, -ds / s4, -ds * u * sign4 / s4};
      const double r = y[k] - p(x[k]);
      for (int a = 0; a < 4; ++a) {
        jtr[a] += jac[a] * r;
        for (int b = 0; b < 4; ++b) jtj[a][b] += jac[a] * jac[b];
      }
    }
    bool improved = false;
    double new_sse = sse;
    while (lambda < 1e12) {
      auto a = jtj;
      for (int d = 0; d < 4; ++d) a[d][d] += lambda * (jtj[d][d] > 0.0 ? jtj[d][d] : 1.0);
      std::array<double, 4> step{};
      if (detail::solve4(a, jtr, step)) {
        LogisticParams cand{p.b1 + step[0], p.b2 + step[1], p.b3 + step[2], p.b4 + step[3]};
        if (cand.b4 != 0.0) {
          const double cs = detail::logistic_sse(cand, x, y);
          if (std::isfinite(cs) && cs <= sse) {
            p = cand;
            new_sse = cs;
            improved = true;
            lambda = std::max(lambda / 10.0, 1e-12);
            break;
          }
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;
    const double rel = (sse - new_sse) / std::max(sse, std::numeric_limits<double>::min());
    sse = new_sse;
    if (rel < 1e-8) break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Trained model, search and prediction
// ---------------------------------------------------------------------------

struct SearchRecord {
  double c = 0.0;
  double gamma = 0.0;
  double cv_rmse = 0.0;
};

struct SvrOptions {
  int budget = 50;
  std::uint64_t seed = 0;
  int folds = 5;
  double epsilon = 0.1;  // in standardized-label units
  double log2_c_min = -5.0, log2_c_max = 15.0;
  double log2_gamma_min = -15.0, log2_gamma_max = 3.0;
  double tolerance = 1e-3;
  unsigned threads = 1;
  // Skip the search and train with exactly this (C, gamma).
  std::optional<std::pair<double, double>> fixed;
};

struct TrainedModel {
  static constexpr std::uint32_t kVersion = 1;

  Standardizer scaler;
  double c = 1.0;
  double gamma = 1.0;
  double epsilon = 0.1;
  double label_mean = 0.0;
  double label_scale = 1.0;
  Matrix support_vectors;         // standardized rows
  std::vector<double> dual_coef;  // one per support vector
  double bias = 0.0;              // in standardized-label units
  std::optional<LogisticParams> logistic;

  // Provenance of the fit.
  SvrOptions options;
  std::size_t training_size = 0;
  double cv_rmse = 0.0;
  std::vector<SearchRecord> search;
  SolverStats solver;
  std::vector<double> training_scores;  // raw predictions on the training rows
  nlohmann::json config = nlohmann::json::object();  // caller-supplied settings echo

  std::size_t dim() const { return scaler.mean.size(); }
};

inline double predict(const TrainedModel& m, std::span<const double> x) {
  require(x.size() == m.dim(), ErrorKind::geometry,
          "feature length " + std::to_string(x.size()) + " does not match model dim " +
              std::to_string(m.dim()));
  std::vector<double> z(x.size());
  m.scaler.apply(x, z);
  double f = m.bias;
  for (std::size_t s = 0; s < m.dual_coef.size(); ++s)
    f += m.dual_coef[s] * std::exp(-m.gamma * squared_distance(m.support_vectors.row(s), z));
  return f * m.label_scale + m.label_mean;
}

namespace detail {

struct FoldPlan {
  std::vector<std::vector<std::size_t>> test;  // per fold, indices held out
};

inline FoldPlan make_folds(std::size_t n, int folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));
  FoldPlan plan;
  plan.test.resize(folds);
  for (std::size_t k = 0; k < n; ++k) plan.test[k % folds].push_back(order[k]);
  for (auto& f : plan.test) std::sort(f.begin(), f.end());
  return plan;
}

// Out-of-fold predictions (standardized-label units) for one (C, gamma).
inline std::vector<double> oof_predict(const Matrix& dist, std::span<const double> z,
                                       const FoldPlan& folds, double c, double gamma,
                                       double epsilon, double tol) {
  const std::size_t n = z.size();
  std::vector<double> pred(n, 0.0);
  std::vector<char> held(n);
  for (const auto& test : folds.test) {
    std::fill(held.begin(), held.end(), 0);
    for (auto t : test) held[t] = 1;
    std::vector<std::size_t> train;
    for (std::size_t k = 0; k < n; ++k)
      if (!held[k]) train.push_back(k);
    Matrix k(train.size(), train.size());
    std::vector<double> zt(train.size());
    for (std::size_t a = 0; a < train.size(); ++a) {
      zt[a] = z[train[a]];
      for (std::size_t b = 0; b < train.size(); ++b)
        k(a, b) = std::exp(-gamma * dist(train[a], train[b]));
    }
    const auto sol = solve_svr(k, zt, c, epsilon, tol);
    for (auto t : test) {
      double f = -sol.rho;
      for (std::size_t a = 0; a < train.size(); ++a)
        if (sol.coef[a] != 0.0) f += sol.coef[a] * std::exp(-gamma * dist(train[a], t));
      pred[t] = f;
    }
  }
  return pred;
}

inline void check_training_data(const Matrix& x, std::span<const double> y) {
  require(x.rows == y.size(), ErrorKind::geometry, "feature rows and labels differ in count");
  require(x.rows >= 20, ErrorKind::precondition,
          "SVR training needs at least 20 samples, got " + std::to_string(x.rows));
  for (double v : x.data) require(std::isfinite(v), ErrorKind::data, "non-finite feature value");
  for (double v : y) require(std::isfinite(v), ErrorKind::data, "non-finite label");
}

}  // namespace detail

// Standardizes features and labels, searches (C, gamma) log-uniformly by
// k-fold cross-validated RMSE, then refits on all rows with the winner.
inline TrainedModel fit_svr(const Matrix& x, std::span<const double> labels,
                            const SvrOptions& opt = {}) {
  detail::check_training_data(x, labels);
  require(opt.budget >= 1 && opt.folds >= 2, ErrorKind::usage, "invalid search settings");
  const std::size_t n = x.rows;

  TrainedModel m;
  m.options = opt;
  m.epsilon = opt.epsilon;
  m.training_size = n;
  m.scaler = Standardizer::fit(x);
  const Matrix xs = m.scaler.apply(x);

  m.label_mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : labels) var += (v - m.label_mean) * (v - m.label_mean);
  m.label_scale = std::sqrt(var / static_cast<double>(n));
  require(m.label_scale > 0.0, ErrorKind::degenerate, "labels are constant");
  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = (labels[k] - m.label_mean) / m.label_scale;

  const Matrix dist = pairwise_squared_distances(xs);

  if (opt.fixed) {
    m.c = opt.fixed->first;
    m.gamma = opt.fixed->second;
  } else {
    Rng rng(opt.seed);
    std::vector<SearchRecord> cands(static_cast<std::size_t>(opt.budget));
    for (auto& cand : cands) {
      cand.c = std::exp2(rng.uniform(opt.log2_c_min, opt.log2_c_max));
      cand.gamma = std::exp2(rng.uniform(opt.log2_gamma_min, opt.log2_gamma_max));
    }
    const auto folds = detail::make_folds(n, opt.folds, derive_seed(opt.seed, 1));
    parallel_for(cands.size(), opt.threads, [&](std::size_t k) {
      const auto pred = detail::oof_predict(dist, z, folds, cands[k].c, cands[k].gamma,
                                            opt.epsilon, opt.tolerance);
      double se = 0.0;
      for (std::size_t t = 0; t < n; ++t) se += (pred[t] - z[t]) * (pred[t] - z[t]);
      cands[k].cv_rmse = std::sqrt(se / static_cast<double>(n)) * m.label_scale;
    });
    std::size_t best = 0;
    for (std::size_t k = 1; k < cands.size(); ++k)
      if (cands[k].cv_rmse < cands[best].cv_rmse) best = k;
    m.c = cands[best].c;
    m.gamma = cands[best].gamma;
    m.cv_rmse = cands[best].cv_rmse;
    m.search = std::move(cands);
  }

  Matrix k(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) k(a, b) = std::exp(-m.gamma * dist(a, b));
  const auto sol = solve_svr(k, z, m.c, opt.epsilon, opt.tolerance);
  m.solver = sol.stats;
  m.bias = -sol.rho;
  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (sol.coef[t] != 0.0) sv.push_back(t);
  m.support_vectors = Matrix(sv.size(), x.cols);
  m.dual_coef.resize(sv.size());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    std::copy(xs.row(sv[s]).begin(), xs.row(sv[s]).end(), m.support_vectors.row(s).begin());
    m.dual_coef[s] = sol.coef[sv[s]];
  }
  m.training_scores.resize(n);
  for (std::size_t t = 0; t < n; ++t) m.training_scores[t] = predict(m, x.row(t));
  return m;
}

// Out-of-fold predictions in label units for fixed hyperparameters.
inline std::vector<double> cross_val_predict(const Matrix& x, std::span<const double> labels,
                                             double c, double gamma, const SvrOptions& opt = {}) {
  detail::check_training_data(x, labels);
  const std::size_t n = x.rows;
  const Matrix xs = Standardizer::fit(x).apply(x);
  const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : labels) var += (v - mean) * (v - mean);
  const double scale = std::sqrt(var / static_cast<double>(n));
  require(scale > 0.0, ErrorKind::degenerate, "labels are constant");
  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = (labels[k] - mean) / scale;
  const auto folds = detail::make_folds(n, opt.folds, derive_seed(opt.seed, 1));
  auto pred = detail::oof_predict(pairwise_squared_distances(xs), z, folds, c, gamma, opt.epsilon,
                                  opt.tolerance);
  for (double& p : pred) p = p * scale + mean;
  return pred;
}

// ---------------------------------------------------------------------------
// Model file: "RQM1" | u32 version | u64 json length | JSON | f64 arrays
// The JSON block holds every scalar and the array sizes; the binary block
// stores scaler mean, scaler scale, support vectors (row-major), dual
// coefficients and training scores, in that order.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "RQM1";

inline std::vector<unsigned char> encode_model(const TrainedModel& m) {
  nlohmann::json j = {
      {"dim", m.dim()},
      {"C", m.c},
      {"gamma", m.gamma},
      {"epsilon", m.epsilon},
      {"kernel", "rbf"},
      {"label_mean", m.label_mean},
      {"label_scale", m.label_scale},
      {"bias", m.bias},
      {"support_vectors", m.support_vectors.rows},
      {"training_size", m.training_size},
      {"zero_variance_dims", m.scaler.zero_variance},
      {"cv_rmse", m.cv_rmse},
      {"solver", {{"iterations", m.solver.iterations}, {"kkt_gap", m.solver.kkt_gap},
                  {"converged", m.solver.converged}}},
      {"search", {{"budget", m.options.budget}, {"seed", m.options.seed},
                  {"folds", m.options.folds},
                  {"log2_C", {m.options.log2_c_min, m.options.log2_c_max}},
                  {"log2_gamma", {m.options.log2_gamma_min, m.options.log2_gamma_max}},
                  {"tolerance", m.options.tolerance},
                  {"fixed", m.options.fixed.has_value()}}},
  };
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& s : m.search) trials.push_back({s.c, s.gamma, s.cv_rmse});
  j["search"]["trials"] = trials;
  j["config"] = m.config;
  if (m.logistic)
    j["logistic"] = {m.logistic->b1, m.logistic->b2, m.logistic->b3, m.logistic->b4};
  const std::string text = j.dump();

  std::vector<unsigned char> out;
  binary::put_magic(out, kModelMagic);
  binary::put_u32(out, TrainedModel::kVersion);
  binary::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (double v : m.scaler.mean) binary::put_f64(out, v);
  for (double v : m.scaler.scale) binary::put_f64(out, v);
  for (double v : m.support_vectors.data) binary::put_f64(out, v);
  for (double v : m.dual_coef) binary::put_f64(out, v);
  for (double v : m.training_scores) binary::put_f64(out, v);
  return out;
}

inline TrainedModel decode_model(const std::vector<unsigned char>& bytes) {
  binary::Reader r(bytes, "model");
  require(r.remaining() >= 16, ErrorKind::parse, "model: header truncated");
  require(r.magic(4) == kModelMagic, ErrorKind::parse, "model: bad magic");
  const std::uint32_t version = r.u32();
  require(version == TrainedModel::kVersion, ErrorKind::unsupported,
          "model: unsupported version " + std::to_string(version));
  const std::uint64_t len = r.u64();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.bytes(len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("model: ") + e.what());
  }
  TrainedModel m;
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto nsv = j.at("support_vectors").get<std::size_t>();
    m.c = j.at("C").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.label_mean = j.at("label_mean").get<double>();
    m.label_scale = j.at("label_scale").get<double>();
    m.bias = j.at("bias").get<double>();
    m.training_size = j.at("training_size").get<std::size_t>();
    m.scaler.zero_variance = j.at("zero_variance_dims").get<std::vector<std::size_t>>();
    m.cv_rmse = j.at("cv_rmse").get<double>();
    const auto& so = j.at("solver");
    m.solver = {so.at("iterations").get<std::size_t>(), so.at("kkt_gap").get<double>(),
                so.at("converged").get<bool>()};
    const auto& se = j.at("search");
    m.options.budget = se.at("budget").get<int>();
    m.options.seed = se.at("seed").get<std::uint64_t>();
    m.options.folds = se.at("folds").get<int>();
    m.options.log2_c_min = se.at("log2_C").at(0).get<double>();
    m.options.log2_c_max = se.at("log2_C").at(1).get<double>();
    m.options.log2_gamma_min = se.at("log2_gamma").at(0).get<double>();
    m.options.log2_gamma_max = se.at("log2_gamma").at(1).get<double>();
    m.options.tolerance = se.at("tolerance").get<double>();
    m.options.epsilon = m.epsilon;
    if (se.at("fixed").get<bool>()) m.options.fixed = std::pair{m.c, m.gamma};
    for (const auto& t : se.at("trials"))
      m.search.push_back({t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
    m.config = j.value("config", nlohmann::json::object());
    if (j.contains("logistic")) {
      const auto& l = j["logistic"];
      m.logistic = LogisticParams{l.at(0).get<double>(), l.at(1).get<double>(),
                                  l.at(2).get<double>(), l.at(3).get<double>()};
    }
    require(r.remaining() == 8 * (2 * dim + nsv * dim + nsv + m.training_size), ErrorKind::parse,
            "model: array block size mismatch");
    m.scaler.mean.resize(dim);
    m.scaler.scale.resize(dim);
    for (auto& v : m.scaler.mean) v = r.f64();
    for (auto& v : m.scaler.scale) v = r.f64();
    m.support_vectors = Matrix(nsv, dim);
    for (auto& v : m.support_vectors.data) v = r.f64();
    m.dual_coef.resize(nsv);
    for (auto& v : m.dual_coef) v = r.f64();
    m.training_scores.resize(m.training_size);
    for (auto& v : m.training_scores) v = r.f64();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("model: ") + e.what());
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  binary::write_file(path, encode_model(m));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  return decode_model(binary::read_file(path));
}

}  // namespace rapique
