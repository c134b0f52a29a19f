#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "mrb/error.hpp"
#include "mrb/fft.hpp"
#include "mrb/parallel.hpp"
#include "mrb/volume.hpp"

namespace mrb {

// Head orientation. Yaw is in-plane rotation (about SL), pitch is nodding (about FE).
struct Pose {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;

  bool is_reference() const { return yaw_deg == 0.0 && pitch_deg == 0.0; }
  friend constexpr bool operator==(const Pose&, const Pose&) = default;
};

enum class Trajectory { Centric, Linear };

// RatioConsistent repeats {left 9EG, stay Ts, right 9EG, stay Ts} after the
// initial stay. LiteralSteps inserts one extra Ts stay per cycle.
enum class CycleVariant { RatioConsistent, LiteralSteps };

inline Trajectory parse_trajectory(std::string_view s) {
  if (s == "centric") return Trajectory::Centric;
  if (s == "linear") return Trajectory::Linear;
  fail(ErrorKind::InvalidPattern, "unknown trajectory '" + std::string(s) + "'");
}

inline std::string_view to_string(Trajectory t) { return t == Trajectory::Centric ? "centric" : "linear"; }

struct MotionPattern {
  std::size_t t_s_eg = 9;      // stay duration, in echo groups
  std::size_t eg_echoes = 80;  // k-space lines acquired per echo group
  double yaw_deg = 5.0;
  double pitch_deg = 0.0;
  Trajectory trajectory = Trajectory::Centric;
  CycleVariant cycle = CycleVariant::RatioConsistent;

  Pose left() const { return {yaw_deg, pitch_deg}; }
  Pose right() const { return {-yaw_deg, pitch_deg}; }
};

struct MotionEvent {
  std::size_t start_line = 0;
  std::size_t end_line = 0;  // exclusive
  Pose pose;
  friend constexpr bool operator==(const MotionEvent&, const MotionEvent&) = default;
};

// Pose per acquired line. Events always partition [0, total_lines).
class MotionSchedule {
 public:
  MotionSchedule(std::vector<MotionEvent> events, std::size_t total_lines, Trajectory trajectory,
                 MotionPattern pattern = {})
      : events_(std::move(events)), total_lines_(total_lines), trajectory_(trajectory), pattern_(pattern) {
    if (total_lines_ == 0) fail(ErrorKind::InvalidPattern, "schedule needs at least one line");
    std::size_t cursor = 0;
    for (const auto& e : events_) {
      if (e.start_line != cursor || e.end_line <= e.start_line) {
        fail(ErrorKind::InvalidPattern, "motion events must partition the line range without gaps");
      }
      cursor = e.end_line;
    }
    if (cursor != total_lines_) fail(ErrorKind::InvalidPattern, "motion events do not cover every line");
  }

  const std::vector<MotionEvent>& events() const { return events_; }
  std::size_t total_lines() const { return total_lines_; }
  Trajectory trajectory() const { return trajectory_; }
  const MotionPattern& pattern() const { return pattern_; }

  const Pose& pose_at(std::size_t line) const {
    auto it = std::upper_bound(events_.begin(), events_.end(), line,
                               [](std::size_t l, const MotionEvent& e) { return l < e.end_line; });
    return it->pose;
  }

  /// 1 where the line is acquired away from the reference pose.
  std::vector<std::uint8_t> corruption_mask() const {
    std::vector<std::uint8_t> mask(total_lines_, 0);
    for (const auto& e : events_) {
      if (!e.pose.is_reference()) std::fill(mask.begin() + e.start_line, mask.begin() + e.end_line, 1);
    }
    return mask;
  }

  /// Distinct poses in order of first appearance.
  std::vector<Pose> poses() const {
    std::vector<Pose> out;
    for (const auto& e : events_) {
      if (std::find(out.begin(), out.end(), e.pose) == out.end()) out.push_back(e.pose);
    }
    return out;
  }

 private:
  std::vector<MotionEvent> events_;
  std::size_t total_lines_;
  Trajectory trajectory_;
  MotionPattern pattern_;
};

/// Builds the repeating rotate/hold/return timeline. Transition intervals carry
/// the rotated pose, so every line of a 9EG episode counts as corrupted.
inline MotionSchedule build_schedule(const MotionPattern& p, std::size_t total_lines) {
  if (p.t_s_eg == 0 || p.eg_echoes == 0 || total_lines == 0) {
    fail(ErrorKind::InvalidPattern, "T_s, echoes per EG and total lines must all be positive");
  }
  if (!std::isfinite(p.yaw_deg) || !std::isfinite(p.pitch_deg)) {
    fail(ErrorKind::InvalidPattern, "pose angles must be finite");
  }

  std::vector<MotionEvent> events;
  std::size_t cursor = 0;
  auto append = [&](std::size_t eg, Pose pose) {
    if (cursor >= total_lines) return;
    const std::size_t end = std::min(total_lines, cursor + eg * p.eg_echoes);
    if (!events.empty() && events.back().pose == pose) {
      events.back().end_line = end;
    } else {
      events.push_back({cursor, end, pose});
    }
    cursor = end;
  };

  if (p.left().is_reference()) {
    events.push_back({0, total_lines, {}});
    return MotionSchedule(std::move(events), total_lines, p.trajectory, p);
  }

  constexpr std::size_t kRotate = 2, kHold = 5, kReturn = 2;
  auto episode = [&](Pose pose) {
    append(kRotate, pose);
    append(kHold, pose);
    append(kReturn, pose);
  };

  append(p.t_s_eg, {});
  while (cursor < total_lines) {
    episode(p.left());
    append(p.t_s_eg, {});
    episode(p.right());
    append(p.t_s_eg, {});
    if (p.cycle == CycleVariant::LiteralSteps) append(p.t_s_eg, {});
  }
  return MotionSchedule(std::move(events), total_lines, p.trajectory, p);
}

/// Fraction of lines acquired away from the reference pose.
inline double corrupted_ratio(const MotionSchedule& s) {
  std::size_t corrupted = 0;
  for (const auto& e : s.events()) {
    if (!e.pose.is_reference()) corrupted += e.end_line - e.start_line;
  }
  return static_cast<double>(corrupted) / static_cast<double>(s.total_lines());
}

/// Steady-state ratio of the RatioConsistent cycle: 18EG / (2 Ts + 18EG).
inline double asymptotic_corrupted_ratio(std::size_t t_s_eg) {
  return 18.0 / (2.0 * static_cast<double>(t_s_eg) + 18.0);
}

/// Line indices by distance from the center line n/2; ties go to the lower index.
inline std::vector<std::size_t> centric_order(std::size_t n_lines) {
  std::vector<std::size_t> order(n_lines);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto center = static_cast<std::ptrdiff_t>(n_lines / 2);
  std::stable_sort(order.begin(), order.end(), [center](std::size_t a, std::size_t b) {
    const auto da = std::abs(static_cast<std::ptrdiff_t>(a) - center);
    const auto db = std::abs(static_cast<std::ptrdiff_t>(b) - center);
    return da < db;
  });
  return order;
}

inline std::vector<std::size_t> acquisition_order(Trajectory t, std::size_t n_lines) {
  if (t == Trajectory::Centric) return centric_order(n_lines);
  std::vector<std::size_t> order(n_lines);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

/// Rigid rotation about the volume center in physical (mm) coordinates,
/// trilinear interpolation, zero outside the field of view.
inline Volume rotate_volume(const Volume& v, const Pose& pose) {
  if (pose.is_reference()) return v;

  const Dims& d = v.dims();
  const Spacing& sp = v.spacing();
  const double yaw = pose.yaw_deg * std::numbers::pi / 180.0;
  const double pitch = pose.pitch_deg * std::numbers::pi / 180.0;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp_ = std::sin(pitch);
  const std::array<double, 3> center{(d.fe - 1) / 2.0, (d.pe - 1) / 2.0, (d.sl - 1) / 2.0};

  auto sample = [&](double fi, double fj, double fk) -> double {
    const double i0 = std::floor(fi), j0 = std::floor(fj), k0 = std::floor(fk);
    const double ti = fi - i0, tj = fj - j0, tk = fk - k0;
    double acc = 0.0;
    for (int dk = 0; dk < 2; ++dk) {
      for (int dj = 0; dj < 2; ++dj) {
        for (int di = 0; di < 2; ++di) {
          const double ii = i0 + di, jj = j0 + dj, kk = k0 + dk;
          if (ii < 0 || jj < 0 || kk < 0 || ii >= d.fe || jj >= d.pe || kk >= d.sl) continue;
          const double w = (di ? ti : 1 - ti) * (dj ? tj : 1 - tj) * (dk ? tk : 1 - tk);
          acc += w * v(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj), static_cast<std::size_t>(kk));
        }
      }
    }
    return acc;
  };

  std::vector<float> out(d.total());
  parallel_for(d.sl, [&](std::size_t k) {
    for (std::size_t j = 0; j < d.pe; ++j) {
      for (std::size_t i = 0; i < d.fe; ++i) {
        // Output position in mm, mapped back through the inverse rotation
        // (undo pitch about FE, then undo yaw about SL).
        const double x = (i - center[0]) * sp.fe;
        const double y = (j - center[1]) * sp.pe;
        const double z = (k - center[2]) * sp.sl;
        const double y1 = cp * y + sp_ * z;
        const double z1 = -sp_ * y + cp * z;
        const double x2 = cy * x + sy * y1;
        const double y2 = -sy * x + cy * y1;
        out[v.offset(i, j, k)] = static_cast<float>(
            sample(x2 / sp.fe + center[0], y2 / sp.pe + center[1], z1 / sp.sl + center[2]));
      }
    }
  });
  return Volume(d, std::move(out), v.spacing(), v.intensity_range());
}

struct PoseVariant {
  Pose pose;
  Volume volume;
};

/// Splices per-slice 2D k-space lines from the pose variants. Acquisition is
/// slice-major: global line = slice * n_PE + rank of the PE line in the
/// trajectory order. Each line comes from the variant of the pose active then.
inline Volume splice_kspace(const Volume& v, const MotionSchedule& s, const std::vector<PoseVariant>& catalog) {
  const Dims& d = v.dims();
  if (s.total_lines() != d.pe * d.sl) {
    fail(ErrorKind::ScheduleMismatch, "schedule covers " + std::to_string(s.total_lines()) +
                                          " lines, acquisition has " + std::to_string(d.pe * d.sl) +
                                          " (n_PE * n_SL)");
  }

  std::vector<KSpaceGrid> spectra(catalog.size());
  parallel_for(catalog.size(), [&](std::size_t n) {
    if (!(catalog[n].volume.dims() == d)) {
      fail(ErrorKind::DimensionMismatch, "pose variant dims differ from the source volume");
    }
    spectra[n] = fft2_slices(catalog[n].volume);
  });

  auto variant_of = [&](const Pose& pose) -> std::size_t {
    for (std::size_t n = 0; n < catalog.size(); ++n) {
      if (catalog[n].pose == pose) return n;
    }
    fail(ErrorKind::ScheduleMismatch, "schedule pose has no variant in the catalog");
  };

  const auto order = acquisition_order(s.trajectory(), d.pe);
  std::vector<KSpaceGrid::complex> merged(d.total());
  for (std::size_t k = 0; k < d.sl; ++k) {
    for (std::size_t rank = 0; rank < d.pe; ++rank) {
      const std::size_t line = order[rank];
      const auto& src = spectra[variant_of(s.pose_at(k * d.pe + rank))];
      for (std::size_t i = 0; i < d.fe; ++i) merged[src.offset(i, line, k)] = src(i, line, k);
    }
  }
  return ifft_magnitude(KSpaceGrid(d, std::move(merged), KSpaceLayout::PerSlice2D, v.spacing()));
}

/// Motion-corrupted volume: rotates the source into every scheduled pose and
/// splices their k-space lines along the acquisition timeline.
inline Volume apply_motion(const Volume& v, const MotionSchedule& s) {
  if (s.total_lines() != v.dims().pe * v.dims().sl) {
    fail(ErrorKind::ScheduleMismatch, "schedule covers " + std::to_string(s.total_lines()) +
                                          " lines, acquisition has " +
                                          std::to_string(v.dims().pe * v.dims().sl));
  }
  std::vector<PoseVariant> catalog;
  for (const auto& pose : s.poses()) catalog.push_back({pose, rotate_volume(v, pose)});
  return splice_kspace(v, s, catalog);
}

}  // namespace mrb
