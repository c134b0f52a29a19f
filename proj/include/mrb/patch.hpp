#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mrb/error.hpp"
#include "mrb/io.hpp"
#include "mrb/volume.hpp"

namespace mrb {

// Patch geometry. In-plane patches are square; thin-slab windows span
// slices_per_patch slices and advance by slices_per_patch - slice_overlap.
struct PatchSpec {
  std::size_t in_plane_size = 64;
  std::size_t in_plane_overlap = 16;
  std::size_t slices_per_patch = 1;
  std::size_t slice_overlap = 0;
  std::size_t scale_in_plane = 1;  // LR -> HR factor, in-plane
  std::size_t scale_slices = 1;    // LR -> HR factor, through-plane

  std::size_t in_plane_stride() const { return in_plane_size - in_plane_overlap; }
  std::size_t slice_stride() const { return slices_per_patch - slice_overlap; }

  void validate() const {
    if (in_plane_size == 0 || slices_per_patch == 0 || scale_in_plane == 0 || scale_slices == 0) {
      fail(ErrorKind::InvalidPattern, "patch sizes and scales must be positive");
    }
    if (in_plane_overlap >= in_plane_size) fail(ErrorKind::InvalidPattern, "in-plane overlap must be < patch size");
    if (slice_overlap >= slices_per_patch) fail(ErrorKind::InvalidPattern, "slice overlap must be < slices per patch");
  }

  /// Matching HR geometry: every length scales by the LR -> HR factors.
  PatchSpec high_resolution() const {
    PatchSpec hr = *this;
    hr.in_plane_size = in_plane_size * scale_in_plane;
    hr.in_plane_overlap = in_plane_overlap * scale_in_plane;
    hr.slices_per_patch = slices_per_patch * scale_slices;
    hr.slice_overlap = slice_overlap * scale_slices;
    hr.scale_in_plane = 1;
    hr.scale_slices = 1;
    return hr;
  }

  /// Thin-slab spec: n slices per window, n - 1 of them shared with the next.
  static PatchSpec thin_slab(std::size_t size, std::size_t overlap, std::size_t n) {
    return {size, overlap, n, n - 1, 1, 1};
  }

  friend constexpr bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

struct Patch {
  Index3 origin;  // (FE, PE, slice) of the patch's first voxel
  Volume data;
};

struct PatchSet {
  std::vector<Patch> patches;
  Dims source_dims;
  PatchSpec spec;
};

/// Window origins along one axis: a regular grid, plus a final window flush
/// with the boundary when the grid does not land on it.
inline std::vector<std::size_t> patch_origins(std::size_t length, std::size_t size, std::size_t stride) {
  if (size > length) {
    fail(ErrorKind::VolumeTooSmall, "patch of " + std::to_string(size) + " does not fit in " + std::to_string(length));
  }
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + size <= length; o += stride) out.push_back(o);
  if (out.back() + size != length) out.push_back(length - size);
  return out;
}

inline PatchSet crop(const Volume& v, const PatchSpec& spec) {
  spec.validate();
  const Dims& d = v.dims();
  const auto fe = patch_origins(d.fe, spec.in_plane_size, spec.in_plane_stride());
  const auto pe = patch_origins(d.pe, spec.in_plane_size, spec.in_plane_stride());
  const auto sl = patch_origins(d.sl, spec.slices_per_patch, spec.slice_stride());

  PatchSet set{{}, d, spec};
  set.patches.reserve(fe.size() * pe.size() * sl.size());
  const Dims pd{spec.in_plane_size, spec.in_plane_size, spec.slices_per_patch};
  for (std::size_t i0 : fe) {
    for (std::size_t j0 : pe) {
      for (std::size_t k0 : sl) {
        std::vector<float> buf;
        buf.reserve(pd.total());
        for (std::size_t k = 0; k < pd.sl; ++k) {
          for (std::size_t j = 0; j < pd.pe; ++j) {
            const auto row = v.values().subspan(v.offset(i0, j0 + j, k0 + k), pd.fe);
            buf.insert(buf.end(), row.begin(), row.end());
          }
        }
        set.patches.push_back({{i0, j0, k0}, Volume(pd, std::move(buf), v.spacing(), v.intensity_range())});
      }
    }
  }
  return set;
}

/// Per-voxel mean over every patch covering the voxel.
inline Volume assemble(const PatchSet& ps) {
  const Dims& d = ps.source_dims;
  std::vector<double> sum(d.total(), 0.0);
  std::vector<std::uint32_t> count(d.total(), 0);
  Spacing spacing{};
  for (const auto& p : ps.patches) {
    const Dims& pd = p.data.dims();
    if (p.origin.i + pd.fe > d.fe || p.origin.j + pd.pe > d.pe || p.origin.k + pd.sl > d.sl) {
      fail(ErrorKind::DimensionMismatch, "patch extends beyond the source volume");
    }
    spacing = p.data.spacing();
    for (std::size_t k = 0; k < pd.sl; ++k) {
      for (std::size_t j = 0; j < pd.pe; ++j) {
        for (std::size_t i = 0; i < pd.fe; ++i) {
          const auto at = (p.origin.i + i) + d.fe * ((p.origin.j + j) + d.pe * (p.origin.k + k));
          sum[at] += p.data(i, j, k);
          ++count[at];
        }
      }
    }
  }
  std::vector<float> out(d.total());
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (count[n] == 0) fail(ErrorKind::CoverageGap, "voxel " + std::to_string(n) + " is not covered by any patch");
    out[n] = static_cast<float>(sum[n] / count[n]);
  }
  return Volume(d, std::move(out), spacing);
}

// Output of one thin-slab window: slices [first_slice, first_slice + data.sl).
struct SlabOutput {
  std::size_t first_slice = 0;
  Volume data;
};

/// Averages every prediction each slice received across overlapping windows.
inline Volume self_ensemble(const std::vector<SlabOutput>& outputs, std::size_t n_slices) {
  if (outputs.empty()) fail(ErrorKind::MissingSlice, "no window outputs to ensemble");
  const Dims& first = outputs.front().data.dims();
  const Dims d{first.fe, first.pe, n_slices};
  const std::size_t plane = d.fe * d.pe;
  std::vector<double> sum(d.total(), 0.0);
  std::vector<std::uint32_t> count(n_slices, 0);
  for (const auto& o : outputs) {
    const Dims& od = o.data.dims();
    if (od.fe != d.fe || od.pe != d.pe) fail(ErrorKind::DimensionMismatch, "window outputs differ in-plane");
    if (o.first_slice + od.sl > n_slices) fail(ErrorKind::DimensionMismatch, "window extends past the last slice");
    for (std::size_t k = 0; k < od.sl; ++k) {
      const auto src = o.data.slice(k);
      double* dst = sum.data() + (o.first_slice + k) * plane;
      for (std::size_t n = 0; n < plane; ++n) dst[n] += src[n];
      ++count[o.first_slice + k];
    }
  }
  std::vector<float> out(d.total());
  for (std::size_t k = 0; k < n_slices; ++k) {
    if (count[k] == 0) fail(ErrorKind::MissingSlice, "slice " + std::to_string(k) + " has no prediction");
    for (std::size_t n = 0; n < plane; ++n) out[k * plane + n] = static_cast<float>(sum[k * plane + n] / count[k]);
  }
  return Volume(d, std::move(out), outputs.front().data.spacing());
}

inline json to_json(const PatchSpec& s) {
  return json{{"in_plane_size", s.in_plane_size},     {"in_plane_overlap", s.in_plane_overlap},
              {"slices_per_patch", s.slices_per_patch}, {"slice_overlap", s.slice_overlap},
              {"scale", {s.scale_in_plane, s.scale_slices}}};
}

inline PatchSpec patch_spec_from_json(const json& j) {
  static const std::vector<std::string> known{"in_plane_size", "in_plane_overlap", "slices_per_patch",
                                              "slice_overlap", "scale"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::ManifestError, "unknown patch field '" + key + "'");
    }
  }
  try {
    PatchSpec s;
    s.in_plane_size = j.at("in_plane_size").get<std::size_t>();
    s.in_plane_overlap = j.at("in_plane_overlap").get<std::size_t>();
    s.slices_per_patch = j.value("slices_per_patch", std::size_t{1});
    s.slice_overlap = j.value("slice_overlap", s.slices_per_patch - 1);
    if (j.contains("scale")) {
      const auto sc = j["scale"].get<std::vector<std::size_t>>();
      if (sc.size() != 2) fail(ErrorKind::ManifestError, "patch scale must be [in_plane, slices]");
      s.scale_in_plane = sc[0];
      s.scale_slices = sc[1];
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::ManifestError, std::string("patch spec: ") + e.what());
  }
}

/// Writes one native volume per patch plus manifest.json {spec, origins, source_dims, files}.
inline void store_patch_set(const PatchSet& ps, const fs::path& dir) {
  fs::create_directories(dir);
  json origins = json::array();
  json files = json::array();
  for (std::size_t n = 0; n < ps.patches.size(); ++n) {
    const auto& p = ps.patches[n];
    const std::string name = "patch_" + std::to_string(n);
    store_volume(p.data, dir / name);
    origins.push_back({p.origin.i, p.origin.j, p.origin.k});
    files.push_back(name);
  }
  const json manifest{{"spec", to_json(ps.spec)},
                      {"origins", origins},
                      {"files", files},
                      {"source_dims", {ps.source_dims.fe, ps.source_dims.pe, ps.source_dims.sl}}};
  detail::write_json_file(dir / "manifest.json", manifest);
}

inline PatchSet load_patch_set(const fs::path& dir) {
  const auto manifest = detail::read_json_file(dir / "manifest.json");
  try {
    PatchSet ps;
    ps.spec = patch_spec_from_json(manifest.at("spec"));
    const auto sd = manifest.at("source_dims").get<std::vector<std::size_t>>();
    if (sd.size() != 3) fail(ErrorKind::FormatError, "source_dims must have three entries");
    ps.source_dims = {sd[0], sd[1], sd[2]};
    const auto& origins = manifest.at("origins");
    const auto& files = manifest.at("files");
    if (origins.size() != files.size()) fail(ErrorKind::FormatError, "manifest origins/files length mismatch");
    for (std::size_t n = 0; n < origins.size(); ++n) {
      const auto o = origins[n].get<std::vector<std::size_t>>();
      if (o.size() != 3) fail(ErrorKind::FormatError, "patch origin must have three entries");
      ps.patches.push_back({{o[0], o[1], o[2]}, load_volume(dir / files[n].get<std::string>(), VolumeFormat::Native)});
    }
    return ps;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, std::string("patch manifest: ") + e.what());
  }
}

}  // namespace mrb
