#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mrb/volume.hpp"

namespace mrb {

namespace detail {

using cplx = std::complex<double>;

// Transforms every 1D line along `axis` in place. Forward output is written
// centered (zero frequency at n/2); inverse input is read centered. Scaling
// is 1/sqrt(n) in both directions so the transform is unitary.
inline void transform_axis(std::span<cplx> data, const Dims& dims, std::size_t axis, bool inverse) {
  const std::size_t n = dims[axis];
  if (n == 1) return;

  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? dims.fe : dims.fe * dims.pe);
  const std::size_t lines = dims.total() / n;
  const std::size_t half = n / 2;
  const double gain = 1.0 / std::sqrt(static_cast<double>(n));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> in(n), out(n);

  for (std::size_t line = 0; line < lines; ++line) {
    // Decompose the line number into the base offset of the line.
    std::size_t base;
    if (axis == 0) {
      base = line * dims.fe;
    } else if (axis == 1) {
      base = (line % dims.fe) + (line / dims.fe) * dims.fe * dims.pe;
    } else {
      base = line;
    }

    if (!inverse) {
      for (std::size_t t = 0; t < n; ++t) in[t] = data[base + t * stride];
      fft.fwd(out, in);
      for (std::size_t f = 0; f < n; ++f) data[base + ((f + half) % n) * stride] = out[f] * gain;
    } else {
      for (std::size_t f = 0; f < n; ++f) in[f] = data[base + ((f + half) % n) * stride];
      fft.inv(out, in);
      for (std::size_t t = 0; t < n; ++t) data[base + t * stride] = out[t] * gain;
    }
  }
}

inline std::vector<cplx> to_complex(const Volume& v) {
  std::vector<cplx> out(v.size());
  auto src = v.values();
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = cplx(src[n], 0.0);
  return out;
}

inline std::size_t transformed_axes(KSpaceLayout layout) {
  return layout == KSpaceLayout::Volumetric3D ? 3 : 2;
}

}  // namespace detail

/// Unitary centered 3D DFT. The zero-frequency sample lands at floor(n/2) on
/// every axis, so Parseval holds without extra scaling.
inline KSpaceGrid fft3(const Volume& v) {
  auto data = detail::to_complex(v);
  for (std::size_t axis = 0; axis < 3; ++axis) detail::transform_axis(data, v.dims(), axis, false);
  return KSpaceGrid(v.dims(), std::move(data), KSpaceLayout::Volumetric3D, v.spacing());
}

/// Per-slice 2D transform over the (FE, PE) plane; slices are independent.
inline KSpaceGrid fft2_slices(const Volume& v) {
  auto data = detail::to_complex(v);
  for (std::size_t axis = 0; axis < 2; ++axis) detail::transform_axis(data, v.dims(), axis, false);
  return KSpaceGrid(v.dims(), std::move(data), KSpaceLayout::PerSlice2D, v.spacing());
}

/// Inverse of fft3 / fft2_slices (chosen by the grid layout), complex result.
inline std::vector<std::complex<double>> inverse_complex(const KSpaceGrid& k) {
  std::vector<std::complex<double>> data(k.values().begin(), k.values().end());
  for (std::size_t axis = 0; axis < detail::transformed_axes(k.layout()); ++axis) {
    detail::transform_axis(data, k.dims(), axis, true);
  }
  return data;
}

struct InverseResult {
  Volume volume;
  // Largest |imag| discarded when taking the real part.
  double max_imag = 0.0;
};

inline InverseResult ifft_real(const KSpaceGrid& k) {
  const auto data = inverse_complex(k);
  std::vector<float> out(data.size());
  double max_imag = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    out[n] = static_cast<float>(data[n].real());
    max_imag = std::max(max_imag, std::abs(data[n].imag()));
  }
  return {Volume(k.dims(), std::move(out), k.spacing()), max_imag};
}

/// Real part of the inverse transform.
inline Volume ifft3(const KSpaceGrid& k) { return ifft_real(k).volume; }

/// Magnitude of the inverse transform, as a scanner reconstructs magnitude images.
inline Volume ifft_magnitude(const KSpaceGrid& k) {
  const auto data = inverse_complex(k);
  std::vector<float> out(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) out[n] = static_cast<float>(std::abs(data[n]));
  return Volume(k.dims(), std::move(out), k.spacing());
}

}  // namespace mrb
