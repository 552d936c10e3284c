#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "rapique/evaluation.hpp"
#include "rapique/regressor.hpp"
#include "support/expect_error.hpp"
#include "support/fixtures.hpp"

using namespace rapique;

namespace {

struct Toy {
  Matrix x;
  std::vector<double> y;
};

// Labels depend on one feature; the remaining columns are distractors.
Toy linear_toy(std::size_t n, std::size_t dims, std::uint64_t seed) {
  Rng rng(seed);
  Toy t{Matrix(n, dims), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dims; ++j) t.x(i, j) = rng.uniform(-1.0, 1.0);
    t.y[i] = 3.0 + 1.5 * t.x(i, 0);
  }
  return t;
}

SvrOptions fixed_options(double c, double gamma) {
  SvrOptions o;
  o.fixed = std::pair{c, gamma};
  o.budget = 1;
  return o;
}

std::vector<double> predict_all(const TrainedModel& m, const Matrix& x) {
  std::vector<double> p;
  for (std::size_t i = 0; i < x.rows; ++i) p.push_back(predict(m, x.row(i)));
  return p;
}

}  // namespace

TEST(Standardizer, ZeroVarianceColumnsRecorded) {
  Matrix x(4, 3);
  const double col0[4] = {1, 2, 3, 4};
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = col0[i];
    x(i, 1) = 7.0;
    x(i, 2) = -col0[i] * 10.0;
  }
  const auto s = Standardizer::fit(x);
  EXPECT_EQ(s.mean[0], 2.5);
  EXPECT_NEAR(s.scale[0], std::sqrt(1.25), 1e-15);
  EXPECT_EQ(s.scale[1], 1.0);
  EXPECT_EQ(s.zero_variance, std::vector<std::size_t>{1});
  const auto z = s.apply(x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(z(i, 1), 0.0);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < 4; ++i) m += z(i, 2);
  for (std::size_t i = 0; i < 4; ++i) v += z(i, 2) * z(i, 2);
  EXPECT_NEAR(m, 0.0, 1e-14);
  EXPECT_NEAR(v / 4.0, 1.0, 1e-14);
}

TEST(SolveSvr, ToyProblemMeetsKkt) {
  // 1-D problem: with a tiny tube and large C, every point lies on or in the tube.
  const std::size_t n = 12;
  Matrix x(n, 1);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) / (n - 1);
    z[i] = std::sin(3.0 * x(i, 0));
  }
  const auto d = pairwise_squared_distances(x);
  Matrix k(n, n);
  for (std::size_t i = 0; i < n * n; ++i) k.data[i] = std::exp(-4.0 * d.data[i]);
  const double eps = 0.01;
  const auto sol = solve_svr(k, z, 1e4, eps, 1e-3);
  EXPECT_TRUE(sol.stats.converged);
  EXPECT_LE(sol.stats.kkt_gap, 1e-3);
  for (std::size_t i = 0; i < n; ++i) {
    double f = -sol.rho;
    for (std::size_t j = 0; j < n; ++j) f += sol.coef[j] * k(i, j);
    EXPECT_LE(std::abs(f - z[i]), eps + 1e-3) << i;
    EXPECT_LE(std::abs(sol.coef[i]), 1e4 + 1e-9);
  }
  double sum = 0.0;
  for (double c : sol.coef) sum += c;
  EXPECT_NEAR(sum, 0.0, 1e-9);
}

TEST(FitSvr, HardFitPredictsSupportVectorsWithinEpsilon) {
  auto t = linear_toy(24, 3, 1);
  const auto m = fit_svr(t.x, t.y, fixed_options(1e4, 0.5));
  EXPECT_TRUE(m.solver.converged);
  EXPECT_LE(m.solver.kkt_gap, 1e-3);
  EXPECT_LE(m.support_vectors.rows, m.training_size);
  const double tube = (m.epsilon + 1e-3) * m.label_scale;
  for (std::size_t i = 0; i < t.x.rows; ++i) EXPECT_LE(std::abs(predict(m, t.x.row(i)) - t.y[i]), tube) << i;
}

TEST(FitSvr, LinearLabelsRankPerfectlyOnTraining) {
  auto t = linear_toy(100, 8, 2);
  SvrOptions o;
  o.budget = 10;
  const auto m = fit_svr(t.x, t.y, o);
  EXPECT_EQ(m.search.size(), 10u);
  EXPECT_GE(srcc(m.training_scores, t.y), 0.99);
  for (const auto& s : m.search) {
    EXPECT_GE(std::log2(s.c), -5.0);
    EXPECT_LE(std::log2(s.c), 15.0);
    EXPECT_GE(std::log2(s.gamma), -15.0);
    EXPECT_LE(std::log2(s.gamma), 3.0);
  }
  const auto best = std::min_element(m.search.begin(), m.search.end(),
                                     [](auto& a, auto& b) { return a.cv_rmse < b.cv_rmse; });
  EXPECT_EQ(best->c, m.c);
  EXPECT_EQ(best->gamma, m.gamma);
  EXPECT_EQ(m.training_scores, predict_all(m, t.x));
}

TEST(FitSvr, DeterministicGivenSeed) {
  auto t = linear_toy(40, 5, 3);
  // Duplicate rows with equal labels.
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) t.x(20 + i, j) = t.x(i, j), t.y[20 + i] = t.y[i];
  SvrOptions o;
  o.budget = 6;
  o.seed = 99;
  const auto a = fit_svr(t.x, t.y, o), b = fit_svr(t.x, t.y, o);
  EXPECT_EQ(a.c, b.c);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.dual_coef, b.dual_coef);
  EXPECT_EQ(a.training_scores, b.training_scores);
  o.threads = 3;
  EXPECT_EQ(fit_svr(t.x, t.y, o).training_scores, a.training_scores);
  const auto f1 = fit_svr(t.x, t.y, fixed_options(2.0, 0.1)), f2 = fit_svr(t.x, t.y, fixed_options(2.0, 0.1));
  EXPECT_EQ(f1.dual_coef, f2.dual_coef);
  EXPECT_EQ(f1.bias, f2.bias);
}

TEST(FitSvr, AffineColumnRescalingIsAbsorbed) {
  auto t = linear_toy(60, 4, 4);
  SvrOptions o;
  o.budget = 5;
  o.seed = 5;
  const auto a = fit_svr(t.x, t.y, o);
  Matrix x2 = t.x;
  for (std::size_t i = 0; i < x2.rows; ++i) x2(i, 0) = 250.0 * x2(i, 0) - 17.0;
  const auto b = fit_svr(x2, t.y, o);
  EXPECT_EQ(a.c, b.c);
  EXPECT_EQ(a.gamma, b.gamma);
  // Standardised inputs agree only to rounding, so the solver may stop at a
  // slightly different point inside its tolerance.
  const double tol = o.tolerance * a.label_scale;
  for (std::size_t s = 0; s < a.search.size(); ++s) EXPECT_NEAR(a.search[s].cv_rmse, b.search[s].cv_rmse, tol);
  for (std::size_t i = 0; i < t.x.rows; ++i) EXPECT_NEAR(a.training_scores[i], b.training_scores[i], tol);
}

TEST(Predict, ZeroCoefficientsGiveBias) {
  auto t = linear_toy(30, 2, 6);
  auto m = fit_svr(t.x, t.y, fixed_options(1.0, 1.0));
  std::fill(m.dual_coef.begin(), m.dual_coef.end(), 0.0);
  const double want = m.bias * m.label_scale + m.label_mean;
  Rng rng(1);
  for (int k = 0; k < 5; ++k) {
    const std::vector<double> v{rng.uniform(-9, 9), rng.uniform(-9, 9)};
    EXPECT_EQ(predict(m, v), want);
    EXPECT_EQ(predict(m, v), predict(m, v));
  }
  EXPECT_ERROR_KIND(predict(m, std::vector<double>{1.0}), ErrorKind::geometry);
}

TEST(FitSvr, InputErrors) {
  auto small = linear_toy(19, 2, 7);
  EXPECT_ERROR_KIND(fit_svr(small.x, small.y, fixed_options(1, 1)), ErrorKind::precondition);
  auto t = linear_toy(25, 2, 8);
  t.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_ERROR_KIND(fit_svr(t.x, t.y, fixed_options(1, 1)), ErrorKind::data);
  auto u = linear_toy(25, 2, 8);
  u.y[2] = std::numeric_limits<double>::infinity();
  EXPECT_ERROR_KIND(fit_svr(u.x, u.y, fixed_options(1, 1)), ErrorKind::data);
  auto v = linear_toy(25, 2, 8);
  v.y.pop_back();
  EXPECT_ERROR_KIND(fit_svr(v.x, v.y, fixed_options(1, 1)), ErrorKind::geometry);
  auto w = linear_toy(25, 2, 8);
  std::fill(w.y.begin(), w.y.end(), 3.0);
  EXPECT_ERROR_KIND(fit_svr(w.x, w.y, fixed_options(1, 1)), ErrorKind::degenerate);
}

TEST(ModelFile, RoundTripIsBitExact) {
  auto t = linear_toy(40, 6, 9);
  // A constant column exercises the zero-variance list.
  for (std::size_t i = 0; i < t.x.rows; ++i) t.x(i, 5) = 2.0;
  SvrOptions o;
  o.budget = 3;
  o.seed = 12;
  auto m = fit_svr(t.x, t.y, o);
  m.logistic = fit_logistic(m.training_scores, t.y);
  m.config = {{"note", "unit"}};
  rqtest::TempDir dir("model");
  save_model(dir / "m.rqm", m);
  const auto back = load_model(dir / "m.rqm");
  EXPECT_EQ(encode_model(back), encode_model(m));
  EXPECT_EQ(back.scaler.zero_variance, std::vector<std::size_t>{5});
  EXPECT_EQ(back.scaler.mean, m.scaler.mean);
  EXPECT_EQ(back.support_vectors.data, m.support_vectors.data);
  EXPECT_EQ(back.c, m.c);
  EXPECT_EQ(back.gamma, m.gamma);
  ASSERT_TRUE(back.logistic);
  EXPECT_EQ(back.logistic->b4, m.logistic->b4);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(predict_all(back, t.x), m.training_scores);
}

TEST(ModelFile, Errors) {
  auto t = linear_toy(25, 2, 10);
  const auto bytes = encode_model(fit_svr(t.x, t.y, fixed_options(1, 1)));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_ERROR_KIND(decode_model(bad), ErrorKind::parse);
  auto version = bytes;
  version[4] = 9;
  EXPECT_ERROR_KIND(decode_model(version), ErrorKind::unsupported);
  auto cut = bytes;
  cut.resize(cut.size() - 8);
  EXPECT_ERROR_KIND(decode_model(cut), ErrorKind::parse);
  EXPECT_ERROR_KIND(load_model("/nonexistent/m.rqm"), ErrorKind::io);
}

TEST(Logistic, RecoversKnownParameters) {
  Rng rng(21);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::mt19937_64 gen(22);
  const LogisticParams truth{5.0, 1.0, 0.0, 1.0};
  std::vector<double> x, y;
  for (int i = 0; i < 400; ++i) {
    x.push_back(rng.uniform(-6.0, 6.0));
    y.push_back(truth(x.back()) + noise(gen));
  }
  const auto p = fit_logistic(x, y);
  EXPECT_NEAR(p.b1, 5.0, 0.1);
  EXPECT_NEAR(p.b2, 1.0, 0.02);
  EXPECT_NEAR(std::abs(p.b4), 1.0, 0.02);
  // Zero target: use the same absolute budget as 2% of the unit scale.
  EXPECT_NEAR(p.b3, 0.0, 0.02);
}

TEST(Logistic, MonotoneAndNeverWorseThanStart) {
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    y.push_back(std::pow(i / 29.0, 3.0) * 4.0 + 1.0);
  }
  const auto p = fit_logistic(x, y);
  for (int i = 1; i < 30; ++i) EXPECT_GE(p(x[i]), p(x[i - 1]));
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= 30;
  for (double v : x) var += (v - mean) * (v - mean);
  const LogisticParams init{*std::max_element(y.begin(), y.end()), *std::min_element(y.begin(), y.end()),
                            mean, std::sqrt(var / 30) / 4};
  EXPECT_LE(detail::logistic_sse(p, x, y), detail::logistic_sse(init, x, y));
}

TEST(Logistic, Errors) {
  const std::vector<double> c(10, 2.0), y{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_ERROR_KIND(fit_logistic(c, y), ErrorKind::degenerate);
  const std::vector<double> few{1, 2, 3, 4, 5, 6, 7};
  EXPECT_ERROR_KIND(fit_logistic(few, few), ErrorKind::precondition);
  EXPECT_ERROR_KIND(fit_logistic(y, few), ErrorKind::geometry);
}
