#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrb/calibration.hpp"
#include "helpers.hpp"

using mrb::ErrorKind;
using testing_util::kind_of;

namespace {

struct Sample {
  std::vector<double> u, y;
};

Sample linear_sample(std::size_t n, double a, double b, double sigma, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uu(0.005, 0.05);
  std::normal_distribution<double> noise(0.0, sigma);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.u.push_back(uu(rng));
    s.y.push_back(a * s.u.back() + b + noise(rng));
  }
  return s;
}

Sample exp_sample(std::size_t n, double p, double q, double r, double sigma, unsigned seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uu(lo, hi);
  std::normal_distribution<double> noise(0.0, sigma);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.u.push_back(uu(rng));
    s.y.push_back(p * std::exp(q * s.u.back()) + r + noise(rng));
  }
  return s;
}

double coverage(const mrb::CalibrationModel& m, const Sample& held_out) {
  std::size_t inside = 0;
  for (std::size_t i = 0; i < held_out.u.size(); ++i) {
    const auto p = mrb::predict_quality(held_out.u[i], m);
    inside += held_out.y[i] >= p.pi_low && held_out.y[i] <= p.pi_high;
  }
  return double(inside) / double(held_out.u.size());
}

}  // namespace

TEST(FitLinear, NoiselessLine) {
  std::vector<double> u, y;
  for (int i = 0; i < 10; ++i) {
    u.push_back(0.1 * i);
    y.push_back(2.0 * u.back() + 1.0);
  }
  const auto m = mrb::fit_linear(u, y);
  EXPECT_NEAR(m.params[0], 1.0, 1e-12);
  EXPECT_NEAR(m.params[1], 2.0, 1e-12);
  EXPECT_NEAR(m.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(m.residual_std, 0.0, 1e-12);
  const auto p = mrb::predict_quality(0.45, m);
  EXPECT_NEAR(p.pi_high - p.pi_low, 0.0, 1e-12);
}

TEST(FitLinear, RecoveryAndCoverage) {
  const auto fit = linear_sample(500, -2.0, 0.98, 0.005, 1);
  const auto m = mrb::fit_linear(fit.u, fit.y);
  const auto se = m.standard_errors();
  EXPECT_LT(std::abs(m.params[0] - 0.98), 3 * se[0]);
  EXPECT_LT(std::abs(m.params[1] + 2.0), 3 * se[1]);
  EXPECT_EQ(m.dof(), 498u);
  const double c = coverage(m, linear_sample(1000, -2.0, 0.98, 0.005, 2));
  EXPECT_GE(c, 0.92);
  EXPECT_LE(c, 0.98);
}

TEST(FitLinear, IntervalWidensAwayFromMean) {
  const auto fit = linear_sample(100, -2.0, 0.98, 0.005, 3);
  const auto m = mrb::fit_linear(fit.u, fit.y);
  double mean = 0.0;
  for (double u : fit.u) mean += u / 100.0;
  const auto at_mean = mrb::predict_quality(mean, m);
  const auto far = mrb::predict_quality(mean + 1.0, m);
  EXPECT_GT(far.pi_high - far.pi_low, at_mean.pi_high - at_mean.pi_low);
}

TEST(FitLinear, Errors) {
  const std::vector<double> u{0.1, 0.1, 0.1, 0.1}, y{1, 2, 3, 4};
  EXPECT_EQ(kind_of([&] { mrb::fit_linear(u, y); }), ErrorKind::DegenerateInput);
  const std::vector<double> two{0.1, 0.2};
  EXPECT_EQ(kind_of([&] { mrb::fit_linear(two, two); }), ErrorKind::DegenerateInput);
}

TEST(FitExponential, NoiselessRecovery) {
  std::vector<double> u, y;
  for (int i = 0; i < 20; ++i) {
    u.push_back(0.05 * i);
    y.push_back(40.0 * std::exp(-2.0 * u.back()) + 20.0);
  }
  const auto m = mrb::fit_exponential(u, y);
  EXPECT_NEAR(m.params[0], 40.0, 1e-6);
  EXPECT_NEAR(m.params[1], -2.0, 1e-6);
  EXPECT_NEAR(m.params[2], 20.0, 1e-6);
  EXPECT_NEAR(m.r_squared, 1.0, 1e-12);
}

TEST(FitExponential, NoisyCoverage) {
  const auto fit = exp_sample(500, 25.0, -40.0, 20.0, 0.5, 4, 0.005, 0.05);
  const auto m = mrb::fit_exponential(fit.u, fit.y);
  const auto se = m.standard_errors();
  EXPECT_LT(std::abs(m.params[0] - 25.0), 3 * se[0]);
  EXPECT_LT(std::abs(m.params[1] + 40.0), 3 * se[1]);
  EXPECT_LT(std::abs(m.params[2] - 20.0), 3 * se[2]);
  const double c = coverage(m, exp_sample(1000, 25.0, -40.0, 20.0, 0.5, 5, 0.005, 0.05));
  EXPECT_GE(c, 0.92);
  EXPECT_LE(c, 0.98);
}

TEST(FitExponential, RecoversFromWrongSignInitialization) {
  // Increasing data; the caller's start forces q < 0.
  const auto data = exp_sample(60, 2.0, 3.0, 10.0, 0.05, 6, 0.0, 1.0);
  mrb::ExponentialFitOptions opt;
  opt.initial = std::array<double, 3>{2.0, -3.0, 10.0};
  const auto m = mrb::fit_exponential(data.u, data.y, opt);
  EXPECT_GT(m.params[1], 0.0);

  // Oracle: best SSE over a coarse grid of (q), with p and r solved linearly.
  auto sse = [&](double p, double q, double r) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.u.size(); ++i) {
      const double e = data.y[i] - (p * std::exp(q * data.u[i]) + r);
      s += e * e;
    }
    return s;
  };
  double best = std::numeric_limits<double>::infinity();
  for (double q = -8.0; q <= 8.0; q += 0.01) {
    if (q == 0.0) continue;
    // Linear least squares in (p, r) for fixed q.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(data.u.size());
    for (std::size_t i = 0; i < data.u.size(); ++i) {
      const double x = std::exp(q * data.u[i]);
      sx += x;
      sy += data.y[i];
      sxx += x * x;
      sxy += x * data.y[i];
    }
    const double p = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double r = (sy - p * sx) / n;
    best = std::min(best, sse(p, q, r));
  }
  EXPECT_LE(sse(m.params[0], m.params[1], m.params[2]), best + 1e-6);
}

TEST(FitExponential, Errors) {
  const std::vector<double> three{0.1, 0.2, 0.3};
  EXPECT_EQ(kind_of([&] { mrb::fit_exponential(three, three); }), ErrorKind::DegenerateInput);
  const auto data = exp_sample(40, 25.0, -40.0, 20.0, 0.5, 7, 0.005, 0.05);
  mrb::ExponentialFitOptions opt;
  opt.max_iterations = 1;
  EXPECT_EQ(kind_of([&] { mrb::fit_exponential(data.u, data.y, opt); }), ErrorKind::NoConvergence);
}

TEST(CalibrationJson, Roundtrip) {
  const auto fit = exp_sample(100, 25.0, -40.0, 20.0, 0.5, 8, 0.005, 0.05);
  const auto m = mrb::fit_exponential(fit.u, fit.y);
  const auto back = mrb::calibration_from_json(mrb::to_json(m));
  EXPECT_EQ(back.kind, m.kind);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.xtx_inv, m.xtx_inv);
  const auto a = mrb::predict_quality(0.02, m), b = mrb::predict_quality(0.02, back);
  EXPECT_EQ(a.pi_low, b.pi_low);
  EXPECT_EQ(kind_of([] { mrb::calibration_from_json({{"kind", "cubic"}}); }), ErrorKind::FormatError);
}
