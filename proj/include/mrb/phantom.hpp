#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mrb/error.hpp"
#include "mrb/volume.hpp"

namespace mrb {

enum class PhantomKind { Ellipsoid, BandLimited, UniformNoise };

inline PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "ellipsoid") return PhantomKind::Ellipsoid;
  if (name == "bandlimited") return PhantomKind::BandLimited;
  if (name == "noise") return PhantomKind::UniformNoise;
  fail(ErrorKind::UnsupportedKind, "unknown phantom kind '" + std::string(name) + "'");
}

struct PhantomOptions {
  // BandLimited: every sinusoid satisfies |k_axis| < cutoff (cycles per FOV) on all axes.
  std::size_t cutoff = 8;
  std::size_t components = 24;
};

namespace detail {

// Portable uniform draw in [0, 1): std::uniform_real_distribution output is
// implementation-defined, mt19937_64 output is not.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

struct Ellipsoid {
  double intensity;
  std::array<double, 3> semi;
  std::array<double, 3> center;
  double phi_deg;  // rotation about the SL axis
};

// Modified 3D Shepp-Logan head, shrunk to leave a zero margin around the skull.
inline std::vector<Ellipsoid> head_ellipsoids() {
  return {
      {1.0, {0.6900, 0.920, 0.810}, {0.0, 0.0, 0.0}, 0.0},
      {-0.8, {0.6624, 0.874, 0.780}, {0.0, -0.0184, 0.0}, 0.0},
      {-0.2, {0.1100, 0.310, 0.220}, {0.22, 0.0, 0.0}, -18.0},
      {-0.2, {0.1600, 0.410, 0.280}, {-0.22, 0.0, 0.0}, 18.0},
      {0.1, {0.2100, 0.250, 0.410}, {0.0, 0.35, -0.15}, 0.0},
      {0.1, {0.0460, 0.046, 0.050}, {0.0, 0.1, 0.25}, 0.0},
      {0.1, {0.0460, 0.046, 0.050}, {0.0, -0.1, 0.25}, 0.0},
      {0.1, {0.0460, 0.023, 0.050}, {-0.08, -0.605, 0.0}, 0.0},
      {0.1, {0.0230, 0.023, 0.020}, {0.0, -0.606, 0.0}, 0.0},
      {0.1, {0.0230, 0.046, 0.020}, {0.06, -0.605, 0.0}, 0.0},
  };
}

inline Volume ellipsoid_phantom(const Dims& dims, std::uint64_t seed) {
  constexpr double shrink = 0.75;
  auto shapes = head_ellipsoids();
  PortableRng rng(seed);
  // The seed perturbs the interior structures only; skull and brain stay fixed.
  for (std::size_t n = 2; n < shapes.size(); ++n) {
    shapes[n].intensity *= rng.uniform(0.8, 1.2);
    for (auto& c : shapes[n].center) c += rng.uniform(-0.02, 0.02);
  }

  std::vector<float> out(dims.total());
  const std::array<double, 3> half{dims.fe / 2.0, dims.pe / 2.0, dims.sl / 2.0};
  std::size_t n = 0;
  for (std::size_t k = 0; k < dims.sl; ++k) {
    for (std::size_t j = 0; j < dims.pe; ++j) {
      for (std::size_t i = 0; i < dims.fe; ++i, ++n) {
        const double x = (i + 0.5 - half[0]) / (half[0] * shrink);
        const double y = (j + 0.5 - half[1]) / (half[1] * shrink);
        const double z = (k + 0.5 - half[2]) / (half[2] * shrink);
        double value = 0.0;
        for (const auto& e : shapes) {
          const double phi = e.phi_deg * std::numbers::pi / 180.0;
          const double dx = x - e.center[0];
          const double dy = y - e.center[1];
          const double dz = z - e.center[2];
          const double u = std::cos(phi) * dx + std::sin(phi) * dy;
          const double w = -std::sin(phi) * dx + std::cos(phi) * dy;
          const double r = (u * u) / (e.semi[0] * e.semi[0]) + (w * w) / (e.semi[1] * e.semi[1]) +
                           (dz * dz) / (e.semi[2] * e.semi[2]);
          if (r <= 1.0) value += e.intensity;
        }
        out[n] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return Volume(dims, std::move(out));
}

inline Volume band_limited_phantom(const Dims& dims, std::uint64_t seed, const PhantomOptions& opt) {
  if (opt.cutoff < 2) fail(ErrorKind::UnsupportedKind, "band-limited cutoff must be >= 2");
  PortableRng rng(seed);
  const auto kmax = static_cast<std::int64_t>(opt.cutoff) - 1;

  struct Wave {
    std::array<double, 3> freq;
    double phase;
    double amplitude;
  };
  std::vector<Wave> waves;
  for (std::size_t c = 0; c < opt.components; ++c) {
    std::array<std::int64_t, 3> kvec{};
    for (std::size_t axis = 0; axis < 3; ++axis) {
      // Axes shorter than the cutoff only get frequencies they can represent.
      const auto limit = std::min<std::int64_t>(kmax, static_cast<std::int64_t>(dims[axis] / 2) - 1);
      kvec[axis] = limit > 0 ? rng.integer(-limit, limit) : 0;
    }
    Wave w{};
    for (std::size_t axis = 0; axis < 3; ++axis) {
      w.freq[axis] = 2.0 * std::numbers::pi * static_cast<double>(kvec[axis]) / static_cast<double>(dims[axis]);
    }
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.amplitude = rng.uniform(0.2, 1.0);
    waves.push_back(w);
  }

  std::vector<double> field(dims.total());
  std::size_t n = 0;
  for (std::size_t k = 0; k < dims.sl; ++k) {
    for (std::size_t j = 0; j < dims.pe; ++j) {
      for (std::size_t i = 0; i < dims.fe; ++i, ++n) {
        double value = 0.0;
        for (const auto& w : waves) {
          value += w.amplitude * std::cos(w.freq[0] * i + w.freq[1] * j + w.freq[2] * k + w.phase);
        }
        field[n] = value;
      }
    }
  }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<float> out(field.size());
  for (std::size_t m = 0; m < field.size(); ++m) {
    out[m] = static_cast<float>(range > 0.0 ? (field[m] - min) / range : 0.0);
  }
  return Volume(dims, std::move(out));
}

inline Volume noise_phantom(const Dims& dims, std::uint64_t seed) {
  PortableRng rng(seed);
  std::vector<float> out(dims.total());
  for (auto& x : out) x = static_cast<float>(rng.uniform());
  return Volume(dims, std::move(out));
}

}  // namespace detail

/// Deterministic synthetic volume; stands in for real scans at desk scale.
inline Volume make_phantom(PhantomKind kind, const Dims& dims, std::uint64_t seed,
                           const PhantomOptions& options = {}) {
  if (dims.fe < 16 || dims.pe < 16 || dims.sl < 16) {
    fail(ErrorKind::VolumeTooSmall, "phantom dims must be at least 16 on every axis, got " + to_string(dims));
  }
  switch (kind) {
    case PhantomKind::Ellipsoid: return detail::ellipsoid_phantom(dims, seed);
    case PhantomKind::BandLimited: return detail::band_limited_phantom(dims, seed, options);
    case PhantomKind::UniformNoise: return detail::noise_phantom(dims, seed);
  }
  fail(ErrorKind::UnsupportedKind, "unsupported phantom kind");
}

}  // namespace mrb
