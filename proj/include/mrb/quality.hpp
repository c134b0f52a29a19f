#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mrb/error.hpp"
#include "mrb/volume.hpp"

namespace mrb {

// SSIM stabilizers for a unit dynamic range.
struct SsimConstants {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

constexpr std::size_t kDefaultSsimWindow = 11;

namespace detail {

inline void require_same_dims(const Volume& x, const Volume& y) {
  if (!(x.dims() == y.dims())) {
    fail(ErrorKind::DimensionMismatch, "image dims differ: " + to_string(x.dims()) + " vs " + to_string(y.dims()));
  }
}

// SSIM from first and second moments (population variance / covariance).
inline double ssim_from_moments(double mx, double my, double vx, double vy, double cxy, const SsimConstants& c) {
  return ((2.0 * mx * my + c.c1) * (2.0 * cxy + c.c2)) / ((mx * mx + my * my + c.c1) * (vx + vy + c.c2));
}

inline double ssim_of(std::span<const float> x, std::span<const float> y, const SsimConstants& c) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  return ssim_from_moments(mx, my, vx / n, vy / n, cxy / n, c);
}

}  // namespace detail

inline double mse(const Volume& x, const Volume& y) {
  detail::require_same_dims(x, y);
  double acc = 0.0;
  const auto a = x.values();
  const auto b = y.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10 log10(max(y)^2 / MSE), y being the reference. Identical images give +inf.
inline double psnr(const Volume& x, const Volume& y) {
  const double m = mse(x, y);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = y.minmax().second;
  return 10.0 * std::log10(peak * peak / m);
}

/// Single-window SSIM over the whole image.
inline double ssim_global(const Volume& x, const Volume& y, const SsimConstants& c = {}) {
  detail::require_same_dims(x, y);
  return detail::ssim_of(x.values(), y.values(), c);
}

struct SsimMap {
  Volume map;
  double mean = 0.0;
  std::vector<double> slice_means;
};

/// SSIM in a window x window in-plane neighbourhood centred on every voxel;
/// windows are clipped at the image border.
inline SsimMap ssim_map(const Volume& x, const Volume& y, std::size_t window = kDefaultSsimWindow,
                        const SsimConstants& c = {}) {
  detail::require_same_dims(x, y);
  const Dims& d = x.dims();
  if (window < 3 || window % 2 == 0) fail(ErrorKind::WindowTooLarge, "SSIM window must be odd and >= 3");
  if (window > std::min(d.fe, d.pe)) {
    fail(ErrorKind::WindowTooLarge, "SSIM window " + std::to_string(window) + " exceeds the in-plane size");
  }
  const std::size_t h = window / 2;
  const std::size_t w1 = d.fe + 1;

  // Summed-area tables of x, y, x^2, y^2 and xy, one slice at a time.
  std::vector<double> sx(w1 * (d.pe + 1)), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
  std::vector<float> out(d.total());
  std::vector<double> slice_means(d.sl, 0.0);
  double total = 0.0;

  for (std::size_t k = 0; k < d.sl; ++k) {
    for (std::size_t j = 0; j < d.pe; ++j) {
      for (std::size_t i = 0; i < d.fe; ++i) {
        const double a = x(i, j, k), b = y(i, j, k);
        const std::size_t at = (i + 1) + w1 * (j + 1);
        const std::size_t up = (i + 1) + w1 * j, left = i + w1 * (j + 1), diag = i + w1 * j;
        sx[at] = a + sx[up] + sx[left] - sx[diag];
        sy[at] = b + sy[up] + sy[left] - sy[diag];
        sxx[at] = a * a + sxx[up] + sxx[left] - sxx[diag];
        syy[at] = b * b + syy[up] + syy[left] - syy[diag];
        sxy[at] = a * b + sxy[up] + sxy[left] - sxy[diag];
      }
    }
    double slice_sum = 0.0;
    for (std::size_t j = 0; j < d.pe; ++j) {
      const std::size_t j0 = j >= h ? j - h : 0, j1 = std::min(d.pe, j + h + 1);
      for (std::size_t i = 0; i < d.fe; ++i) {
        const std::size_t i0 = i >= h ? i - h : 0, i1 = std::min(d.fe, i + h + 1);
        auto box = [&](const std::vector<double>& t) {
          return t[i1 + w1 * j1] - t[i0 + w1 * j1] - t[i1 + w1 * j0] + t[i0 + w1 * j0];
        };
        const double n = static_cast<double>((i1 - i0) * (j1 - j0));
        const double mx = box(sx) / n, my = box(sy) / n;
        // Clamp tiny negative variances produced by cancellation.
        const double vx = std::max(0.0, box(sxx) / n - mx * mx);
        const double vy = std::max(0.0, box(syy) / n - my * my);
        const double cxy = box(sxy) / n - mx * my;
        const double s = detail::ssim_from_moments(mx, my, vx, vy, cxy, c);
        out[x.offset(i, j, k)] = static_cast<float>(s);
        slice_sum += s;
      }
    }
    slice_means[k] = slice_sum / static_cast<double>(d.fe * d.pe);
    total += slice_sum;
  }
  return {Volume(d, std::move(out), x.spacing()), total / static_cast<double>(d.total()), std::move(slice_means)};
}

struct SliceQuality {
  std::size_t slice = 0;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct QualityReport {
  double ssim = 0.0;         // mean of the windowed SSIM map
  double ssim_global = 0.0;  // single-window SSIM over the whole volume
  double psnr = 0.0;
  double mse = 0.0;
  std::vector<SliceQuality> per_slice;
  std::optional<Volume> ssim_map;
};

/// Full report of `restored` against `reference`. Per-slice PSNR uses the
/// reference volume maximum as peak so slices share one dynamic range.
inline QualityReport evaluate(const Volume& restored, const Volume& reference,
                              std::size_t window = kDefaultSsimWindow, bool keep_map = false) {
  QualityReport r;
  auto map = ssim_map(restored, reference, window);
  r.ssim = map.mean;
  r.ssim_global = ssim_global(restored, reference);
  r.mse = mse(restored, reference);
  r.psnr = psnr(restored, reference);

  const double peak = reference.minmax().second;
  const Dims& d = reference.dims();
  for (std::size_t k = 0; k < d.sl; ++k) {
    const auto a = restored.slice(k), b = reference.slice(k);
    double acc = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      const double e = static_cast<double>(a[n]) - static_cast<double>(b[n]);
      acc += e * e;
    }
    const double m = acc / static_cast<double>(a.size());
    const double p = m == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(peak * peak / m);
    r.per_slice.push_back({k, map.slice_means[k], p});
  }
  if (keep_map) r.ssim_map = std::move(map.map);
  return r;
}

namespace detail {

// JSON has no infinity; the PSNR of identical images is written as "inf".
inline nlohmann::json finite_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const QualityReport& r) {
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& s : r.per_slice) {
    slices.push_back({{"slice", s.slice}, {"ssim", s.ssim}, {"psnr", detail::finite_or_inf(s.psnr)}});
  }
  return {{"ssim", r.ssim},
          {"ssim_global", r.ssim_global},
          {"psnr", detail::finite_or_inf(r.psnr)},
          {"mse", r.mse},
          {"per_slice", slices}};
}

}  // namespace mrb
