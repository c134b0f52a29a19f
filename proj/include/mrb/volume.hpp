#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrb/error.hpp"

namespace mrb {

// Axis order is always (FE, PE, SL); FE is the fastest-varying index in memory.
struct Dims {
  std::size_t fe = 1;
  std::size_t pe = 1;
  std::size_t sl = 1;

  constexpr std::size_t total() const { return fe * pe * sl; }
  constexpr std::size_t operator[](std::size_t axis) const {
    return axis == 0 ? fe : (axis == 1 ? pe : sl);
  }
  constexpr std::array<std::size_t, 3> array() const { return {fe, pe, sl}; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.fe) + "x" + std::to_string(d.pe) + "x" + std::to_string(d.sl);
}

struct Index3 {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
  friend constexpr auto operator<=>(const Index3&, const Index3&) = default;
};

struct Spacing {
  double fe = 1.0;
  double pe = 1.0;
  double sl = 1.0;
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

struct IntensityRange {
  double min = 0.0;
  double max = 1.0;
  friend constexpr bool operator==(const IntensityRange&, const IntensityRange&) = default;
};

// Dense 3D grid, FE-fastest. Value type is the only thing Volume and
// KSpaceGrid differ in at the storage level.
template <typename T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;

  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(dims.total(), fill) {
    check_dims();
  }

  Grid3(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    check_dims();
    if (data_.size() != dims_.total()) {
      fail(ErrorKind::DimensionMismatch,
           "grid payload has " + std::to_string(data_.size()) + " samples, dims " +
               to_string(dims_) + " require " + std::to_string(dims_.total()));
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    return i + dims_.fe * (j + dims_.pe * k);
  }

  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[offset(i, j, k)];
  }

  std::span<const T> values() const { return data_; }

  std::span<const T> slice(std::size_t k) const {
    const std::size_t plane = dims_.fe * dims_.pe;
    return std::span<const T>(data_).subspan(k * plane, plane);
  }

 protected:
  std::vector<T>& mutable_values() { return data_; }

 private:
  void check_dims() const {
    if (dims_.fe == 0 || dims_.pe == 0 || dims_.sl == 0) {
      fail(ErrorKind::DimensionMismatch, "grid dims must be positive, got " + to_string(dims_));
    }
  }

  Dims dims_{};
  std::vector<T> data_;
};

// Real-valued intensity volume: HR, LR, motion-corrupted and restored images
// all use this type.
class Volume : public Grid3<float> {
 public:
  Volume() = default;

  Volume(Dims dims, std::vector<float> data, Spacing spacing = {}, IntensityRange range = {})
      : Grid3<float>(dims, std::move(data)), spacing_(spacing), range_(range) {
    if (!(spacing_.fe > 0.0 && spacing_.pe > 0.0 && spacing_.sl > 0.0)) {
      fail(ErrorKind::DimensionMismatch, "voxel spacing must be positive");
    }
  }

  static Volume filled(Dims dims, float value, Spacing spacing = {}) {
    return Volume(dims, std::vector<float>(dims.total(), value), spacing);
  }

  const Spacing& spacing() const { return spacing_; }
  const IntensityRange& intensity_range() const { return range_; }

  Volume with_range(IntensityRange range) const {
    Volume out = *this;
    out.range_ = range;
    return out;
  }

  // Extracts the slab of slices [first, first + count).
  Volume slab(std::size_t first, std::size_t count) const {
    const auto plane = slice(0).size();
    std::vector<float> out(values().begin() + static_cast<std::ptrdiff_t>(first * plane),
                           values().begin() + static_cast<std::ptrdiff_t>((first + count) * plane));
    return Volume({dims().fe, dims().pe, count}, std::move(out), spacing_, range_);
  }

  std::pair<float, float> minmax() const {
    auto [lo, hi] = std::minmax_element(values().begin(), values().end());
    return {*lo, *hi};
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.dims() == b.dims() && std::ranges::equal(a.values(), b.values());
  }

 private:
  Spacing spacing_{};
  IntensityRange range_{};
};

enum class KSpaceLayout { Volumetric3D, PerSlice2D };

// Centered complex spectrum. dc_index is the zero-frequency sample, at
// floor(n/2) along every transformed axis.
class KSpaceGrid : public Grid3<std::complex<double>> {
 public:
  using complex = std::complex<double>;

  KSpaceGrid() = default;

  KSpaceGrid(Dims dims, std::vector<complex> data, KSpaceLayout layout, Spacing spacing = {})
      : Grid3<complex>(dims, std::move(data)), layout_(layout), spacing_(spacing) {}

  KSpaceLayout layout() const { return layout_; }
  const Spacing& spacing() const { return spacing_; }

  Index3 dc_index() const {
    return {dims().fe / 2, dims().pe / 2, layout_ == KSpaceLayout::Volumetric3D ? dims().sl / 2 : 0};
  }

  std::span<complex> mutable_data() { return mutable_values(); }

 private:
  KSpaceLayout layout_ = KSpaceLayout::Volumetric3D;
  Spacing spacing_{};
};

// Global min-max rescale onto [0, 1]. The original bounds are recorded in
// intensity_range so the mapping can be undone.
inline Volume normalize(const Volume& v) {
  const auto [lo, hi] = v.minmax();
  if (!(hi > lo)) {
    fail(ErrorKind::DegenerateRange, "cannot normalize a constant volume (value " +
                                         std::to_string(lo) + ")");
  }
  if (lo == 0.0f && hi == 1.0f) {
    return v;
  }
  const double offset = lo;
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  std::vector<float> out(v.size());
  std::ranges::transform(v.values(), out.begin(), [&](float x) {
    return static_cast<float>((static_cast<double>(x) - offset) / range);
  });
  // Rounding can leave the extremes a ulp away from the target bounds.
  for (auto& x : out) x = std::clamp(x, 0.0f, 1.0f);
  return Volume(v.dims(), std::move(out), v.spacing(), {lo, hi});
}

}  // namespace mrb
