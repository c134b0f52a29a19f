#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "mrb/error.hpp"
#include "mrb/fft.hpp"
#include "mrb/volume.hpp"

namespace mrb {

struct Rational {
  std::size_t num = 0;
  std::size_t den = 1;

  static Rational reduced(std::size_t n, std::size_t d) {
    const auto g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend constexpr bool operator==(const Rational&, const Rational&) = default;
};

inline std::string to_string(const Rational& r) {
  return r.den == 1 ? std::to_string(r.num) : std::to_string(r.num) + "/" + std::to_string(r.den);
}

// Per-axis integer k-space reduction factors, FE x PE x SL.
struct DownsampleStrategy {
  std::array<std::size_t, 3> scale{1, 1, 1};
  bool zero_fill = false;

  // Acquisition time scales with PE and SL encoding steps only.
  Rational acceleration_factor() const { return {scale[1] * scale[2], 1}; }
  Rational retention_ratio() const { return Rational::reduced(1, scale[0] * scale[1] * scale[2]); }

  std::string name() const {
    return std::to_string(scale[0]) + "x" + std::to_string(scale[1]) + "x" + std::to_string(scale[2]);
  }

  friend constexpr bool operator==(const DownsampleStrategy&, const DownsampleStrategy&) = default;
};

inline Rational acceleration_factor(const DownsampleStrategy& s) { return s.acceleration_factor(); }
inline Rational retention_ratio(const DownsampleStrategy& s) { return s.retention_ratio(); }

/// Parses "FExPExSL", e.g. "1x1x2". Throws InvalidPattern on anything else.
inline DownsampleStrategy parse_strategy(std::string_view text, bool zero_fill = false) {
  DownsampleStrategy s;
  s.zero_fill = zero_fill;
  std::size_t axis = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (axis < 3) {
    std::size_t value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || value == 0) break;
    s.scale[axis++] = value;
    p = next;
    if (axis < 3) {
      if (p == end || (*p != 'x' && *p != 'X')) break;
      ++p;
    }
  }
  if (axis != 3 || p != end) {
    fail(ErrorKind::InvalidPattern, "invalid strategy '" + std::string(text) + "', expected FExPExSL");
  }
  return s;
}

struct CatalogEntry {
  DownsampleStrategy strategy;
  Rational acceleration;
};

/// The six downsampling strategies studied, grouped by acceleration factor.
inline std::vector<CatalogEntry> strategy_catalog() {
  const std::array<std::array<std::size_t, 3>, 6> scales{{
      {2, 2, 1}, {1, 1, 2},             // x2
      {1, 1, 3},                        // x3
      {4, 4, 1}, {2, 2, 2}, {1, 1, 4},  // x4
  }};
  std::vector<CatalogEntry> out;
  for (const auto& sc : scales) {
    DownsampleStrategy s{sc, false};
    out.push_back({s, s.acceleration_factor()});
  }
  return out;
}

namespace detail {

// First retained index of a centered window of size m inside n samples.
// For even m this gives [dc - m/2, dc + m/2 - 1].
constexpr std::size_t window_start(std::size_t n, std::size_t m) { return n / 2 - m / 2; }

inline void check_divisible(const Dims& dims, const DownsampleStrategy& s) {
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (s.scale[axis] == 0 || dims[axis] % s.scale[axis] != 0) {
      fail(ErrorKind::IndivisibleDims, "scale " + s.name() + " does not divide dims " + to_string(dims));
    }
  }
}

}  // namespace detail

/// Keeps the centered block of size dims/scale. With zero_fill the grid keeps
/// its dims and the periphery is zeroed; otherwise the block is extracted.
inline KSpaceGrid truncate(const KSpaceGrid& k, const DownsampleStrategy& s) {
  const Dims& d = k.dims();
  detail::check_divisible(d, s);
  if (k.layout() == KSpaceLayout::PerSlice2D && s.scale[2] != 1) {
    fail(ErrorKind::InvalidPattern, "per-slice k-space cannot be truncated along SL");
  }
  const Dims kept{d.fe / s.scale[0], d.pe / s.scale[1], d.sl / s.scale[2]};
  const std::array<std::size_t, 3> start{detail::window_start(d.fe, kept.fe),
                                         detail::window_start(d.pe, kept.pe),
                                         detail::window_start(d.sl, kept.sl)};

  if (s.zero_fill) {
    std::vector<KSpaceGrid::complex> out(d.total());
    for (std::size_t kk = start[2]; kk < start[2] + kept.sl; ++kk) {
      for (std::size_t j = start[1]; j < start[1] + kept.pe; ++j) {
        for (std::size_t i = start[0]; i < start[0] + kept.fe; ++i) {
          out[k.offset(i, j, kk)] = k(i, j, kk);
        }
      }
    }
    return KSpaceGrid(d, std::move(out), k.layout(), k.spacing());
  }

  std::vector<KSpaceGrid::complex> out;
  out.reserve(kept.total());
  for (std::size_t kk = 0; kk < kept.sl; ++kk) {
    for (std::size_t j = 0; j < kept.pe; ++j) {
      for (std::size_t i = 0; i < kept.fe; ++i) {
        out.push_back(k(start[0] + i, start[1] + j, start[2] + kk));
      }
    }
  }
  const Spacing& sp = k.spacing();
  const Spacing coarse{sp.fe * static_cast<double>(s.scale[0]), sp.pe * static_cast<double>(s.scale[1]),
                       sp.sl * static_cast<double>(s.scale[2])};
  return KSpaceGrid(kept, std::move(out), k.layout(), coarse);
}

struct DownsampleResult {
  Volume volume;
  // Imaginary residue dropped after the inverse transform, relative to max|input|.
  double relative_imag_residue = 0.0;
};

inline DownsampleResult downsample_detailed(const Volume& v, const DownsampleStrategy& s) {
  detail::check_divisible(v.dims(), s);
  const auto [lo, hi] = v.minmax();
  const double peak = std::max(std::abs(static_cast<double>(lo)), std::abs(static_cast<double>(hi)));

  auto k = truncate(fft3(v), s);
  auto inv = ifft_real(k);
  // A non-zero-filled block is a smaller unitary grid; renormalization
  // absorbs the resulting sqrt(retention) gain.
  return {normalize(inv.volume), peak > 0.0 ? inv.max_imag / peak : 0.0};
}

/// LR volume by k-space truncation: fft3, truncate, ifft3, real part, then
/// renormalization onto [0, 1].
inline Volume downsample(const Volume& v, const DownsampleStrategy& s) {
  return downsample_detailed(v, s).volume;
}

}  // namespace mrb
