#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "mrb/error.hpp"

namespace mrb {

enum class CalibrationKind { LinearSsim, ExponentialPsnr };

inline std::string to_string(CalibrationKind k) {
  return k == CalibrationKind::LinearSsim ? "linear-ssim" : "exponential-psnr";
}

// Fitted quality-vs-uncertainty regression.
//   linear-ssim:      params = {intercept, slope},  y = intercept + slope * u
//   exponential-psnr: params = {p, q, r},           y = p * exp(q * u) + r
// xtx_inv is (J^T J)^-1 at the solution (row-major), which carries the
// leverage term for prediction intervals and the parameter covariance.
struct CalibrationModel {
  CalibrationKind kind = CalibrationKind::LinearSsim;
  std::vector<double> params;
  double residual_std = 0.0;
  std::size_t n_fit = 0;
  double r_squared = 0.0;
  double pi_level = 0.95;
  std::vector<double> xtx_inv;

  std::size_t n_params() const { return params.size(); }
  std::size_t dof() const { return n_fit - n_params(); }

  double curve(double u) const {
    if (kind == CalibrationKind::LinearSsim) return params[0] + params[1] * u;
    return params[0] * std::exp(params[1] * u) + params[2];
  }

  std::vector<double> gradient(double u) const {
    if (kind == CalibrationKind::LinearSsim) return {1.0, u};
    const double e = std::exp(params[1] * u);
    return {e, params[0] * u * e, 1.0};
  }

  /// Standard errors of params: residual_std * sqrt(diag((J^T J)^-1)).
  std::vector<double> standard_errors() const {
    std::vector<double> out(n_params());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = residual_std * std::sqrt(xtx_inv[i * n_params() + i]);
    return out;
  }
};

struct QualityPrediction {
  double estimate = 0.0;
  double pi_low = 0.0;
  double pi_high = 0.0;
};

namespace detail {

inline double two_sided_t(double level, std::size_t dof) {
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.5 + level / 2.0);
}

inline void check_paired(std::span<const double> u, std::span<const double> y, std::size_t min_points) {
  if (u.size() != y.size()) fail(ErrorKind::DegenerateInput, "u and quality series differ in length");
  if (u.size() < min_points) {
    fail(ErrorKind::DegenerateInput, "need at least " + std::to_string(min_points) + " calibration points");
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(y[i])) fail(ErrorKind::DegenerateInput, "non-finite calibration point");
  }
}

inline double r_squared(std::span<const double> y, double sse) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

struct LinearLs {
  double intercept;
  double slope;
};

inline LinearLs least_squares_line(std::span<const double> u, std::span<const double> y) {
  const double n = static_cast<double>(u.size());
  double mu = 0.0, my = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    my += y[i];
  }
  mu /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    sxx += (u[i] - mu) * (u[i] - mu);
    sxy += (u[i] - mu) * (y[i] - my);
  }
  const double scale = std::max(std::abs(mu), 1.0);
  if (!(sxx > 1e-24 * scale * scale * n)) fail(ErrorKind::DegenerateInput, "calibration inputs have no variance");
  const double slope = sxy / sxx;
  return {my - slope * mu, slope};
}

}  // namespace detail

/// Ordinary least squares line with a t-based prediction interval.
inline CalibrationModel fit_linear(std::span<const double> u, std::span<const double> ssim, double pi_level = 0.95) {
  detail::check_paired(u, ssim, 3);
  const auto line = detail::least_squares_line(u, ssim);

  double sse = 0.0, su = 0.0, suu = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = ssim[i] - (line.intercept + line.slope * u[i]);
    sse += e * e;
    su += u[i];
    suu += u[i] * u[i];
  }
  const double n = static_cast<double>(u.size());
  const double det = n * suu - su * su;

  CalibrationModel m;
  m.kind = CalibrationKind::LinearSsim;
  m.params = {line.intercept, line.slope};
  m.n_fit = u.size();
  m.residual_std = std::sqrt(sse / static_cast<double>(u.size() - 2));
  m.r_squared = detail::r_squared(ssim, sse);
  m.pi_level = pi_level;
  m.xtx_inv = {suu / det, -su / det, -su / det, n / det};
  return m;
}

struct ExponentialFitOptions {
  std::size_t max_iterations = 500;
  double relative_step = 1e-10;
  // Extra starting point {p, q, r}, tried alongside the log-linear pre-fits.
  std::optional<std::array<double, 3>> initial;
};

namespace detail {

struct LmResult {
  Eigen::Vector3d theta;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
};

inline double exp_sse(const Eigen::Vector3d& t, std::span<const double> u, std::span<const double> y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = y[i] - (t[0] * std::exp(t[1] * u[i]) + t[2]);
    sse += e * e;
  }
  return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
}

// Levenberg-Marquardt with Marquardt's diagonal scaling.
inline LmResult levenberg_marquardt(Eigen::Vector3d theta, std::span<const double> u, std::span<const double> y,
                                    const ExponentialFitOptions& opt) {
  LmResult res{theta, exp_sse(theta, u, y), false};
  if (!std::isfinite(res.sse)) return res;
  double mu = 1e-3;
  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double e = std::exp(theta[1] * u[i]);
      const Eigen::Vector3d g(e, theta[0] * u[i] * e, 1.0);
      jtj += g * g.transpose();
      jtr += g * (y[i] - (theta[0] * e + theta[2]));
    }
    if (res.sse == 0.0 || jtr.norm() == 0.0) {
      res.converged = true;
      return res;
    }
    bool accepted = false;
    while (mu < 1e16) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::Vector3d step = a.ldlt().solve(jtr);
      const Eigen::Vector3d candidate = theta + step;
      const double sse = exp_sse(candidate, u, y);
      if (step.allFinite() && sse <= res.sse) {
        const double rel = step.norm() / (theta.norm() + 1e-300);
        theta = candidate;
        res.theta = theta;
        res.sse = sse;
        mu = std::max(mu / 10.0, 1e-15);
        accepted = true;
        if (rel < opt.relative_step) {
          res.converged = true;
          return res;
        }
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) {
      // No damped step lowers the residual: a stationary point at working precision.
      res.converged = true;
      return res;
    }
  }
  return res;
}

inline std::optional<Eigen::Vector3d> log_linear_start(std::span<const double> u, std::span<const double> y,
                                                       bool reflected) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double offset = reflected ? *hi + 1.0 : *lo - 1.0;
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = std::log(reflected ? offset - y[i] : y[i] - offset);
  try {
    const auto line = least_squares_line(u, z);
    const double p = std::exp(line.intercept);
    return Eigen::Vector3d(reflected ? -p : p, line.slope, offset);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Nonlinear least squares for psnr = p exp(q u) + r. Starts from log-linear
/// pre-fits of both curvature signs (and any caller start), each also retried
/// with q negated; the lowest-residual converged run wins.
inline CalibrationModel fit_exponential(std::span<const double> u, std::span<const double> psnr,
                                        const ExponentialFitOptions& opt = {}, double pi_level = 0.95) {
  detail::check_paired(u, psnr, 4);

  std::vector<Eigen::Vector3d> starts;
  if (opt.initial) starts.emplace_back((*opt.initial)[0], (*opt.initial)[1], (*opt.initial)[2]);
  for (bool reflected : {false, true}) {
    if (auto s = detail::log_linear_start(u, psnr, reflected)) starts.push_back(*s);
  }
  const std::size_t base = starts.size();
  for (std::size_t i = 0; i < base; ++i) {
    Eigen::Vector3d flipped = starts[i];
    flipped[1] = -flipped[1];
    starts.push_back(flipped);
  }

  std::optional<detail::LmResult> best;
  for (const auto& s : starts) {
    const auto r = detail::levenberg_marquardt(s, u, psnr, opt);
    if (r.converged && (!best || r.sse < best->sse)) best = r;
  }
  if (!best) fail(ErrorKind::NoConvergence, "exponential regression did not converge from any start");

  const Eigen::Vector3d& t = best->theta;
  Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
  for (double ui : u) {
    const double e = std::exp(t[1] * ui);
    const Eigen::Vector3d g(e, t[0] * ui * e, 1.0);
    jtj += g * g.transpose();
  }
  const Eigen::Matrix3d inv = jtj.completeOrthogonalDecomposition().pseudoInverse();

  CalibrationModel m;
  m.kind = CalibrationKind::ExponentialPsnr;
  m.params = {t[0], t[1], t[2]};
  m.n_fit = u.size();
  m.residual_std = std::sqrt(best->sse / static_cast<double>(u.size() - 3));
  m.r_squared = detail::r_squared(psnr, best->sse);
  m.pi_level = pi_level;
  m.xtx_inv.assign(9, 0.0);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m.xtx_inv[static_cast<std::size_t>(3 * r + c)] = inv(r, c);
  }
  return m;
}

/// Point estimate plus prediction interval at model.pi_level:
/// estimate +- t * s * sqrt(1 + g^T (J^T J)^-1 g).
inline QualityPrediction predict_quality(double u_mean, const CalibrationModel& m) {
  const double estimate = m.curve(u_mean);
  const auto g = m.gradient(u_mean);
  const std::size_t p = m.n_params();
  double leverage = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) leverage += g[r] * m.xtx_inv[r * p + c] * g[c];
  }
  const double half = m.residual_std == 0.0
                          ? 0.0
                          : detail::two_sided_t(m.pi_level, m.dof()) * m.residual_std * std::sqrt(1.0 + leverage);
  return {estimate, estimate - half, estimate + half};
}

inline nlohmann::json to_json(const CalibrationModel& m) {
  return {{"kind", to_string(m.kind)},         {"params", m.params},   {"residual_std", m.residual_std},
          {"n_fit", m.n_fit},                  {"r_squared", m.r_squared}, {"pi_level", m.pi_level},
          {"xtx_inv", m.xtx_inv}};
}

inline CalibrationModel calibration_from_json(const nlohmann::json& j) {
  try {
    CalibrationModel m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear-ssim") {
      m.kind = CalibrationKind::LinearSsim;
    } else if (kind == "exponential-psnr") {
      m.kind = CalibrationKind::ExponentialPsnr;
    } else {
      fail(ErrorKind::FormatError, "unknown calibration kind '" + kind + "'");
    }
    m.params = j.at("params").get<std::vector<double>>();
    m.residual_std = j.at("residual_std").get<double>();
    m.n_fit = j.at("n_fit").get<std::size_t>();
    m.r_squared = j.at("r_squared").get<double>();
    m.pi_level = j.at("pi_level").get<double>();
    const std::size_t p = m.kind == CalibrationKind::LinearSsim ? 2 : 3;
    if (m.params.size() != p) fail(ErrorKind::FormatError, "calibration params have the wrong length");
    if (j.contains("xtx_inv")) {
      m.xtx_inv = j["xtx_inv"].get<std::vector<double>>();
    } else {
      m.xtx_inv.assign(p * p, 0.0);
    }
    if (m.xtx_inv.size() != p * p) fail(ErrorKind::FormatError, "calibration xtx_inv has the wrong size");
    if (m.n_fit <= p) fail(ErrorKind::FormatError, "calibration n_fit too small for its parameter count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("calibration model: ") + e.what());
  }
}

}  // namespace mrb
