#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"

#include "mrb/error.hpp"
#include "mrb/volume.hpp"

namespace mrb {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class VolumeFormat { Native, Nifti };

namespace detail {

inline std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_bytes(const fs::path& path, const char* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) fail(ErrorKind::IoError, "short write to '" + path.string() + "'");
}

template <typename T>
T byteswap_value(T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <typename T>
T read_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
  return value;
}

inline std::vector<char> encode_f32_le(std::span<const float> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t n = 0; n < values.size(); ++n) {
    float x = values[n];
    if constexpr (std::endian::native == std::endian::big) x = byteswap_value(x);
    std::memcpy(bytes.data() + 4 * n, &x, 4);
  }
  return bytes;
}

inline std::vector<float> decode_f32_le(const std::vector<char>& bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = read_le<float>(bytes.data() + 4 * n);
  return out;
}

inline json read_json_file(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  write_bytes(path, text.data(), text.size());
}

struct Sidecar {
  Dims dims;
  Spacing spacing;
  IntensityRange range;
  std::string kind;
  KSpaceLayout layout = KSpaceLayout::Volumetric3D;
};

inline Sidecar parse_sidecar(const json& doc, const std::string& where) {
  try {
    Sidecar s;
    const auto dims = doc.at("dims").get<std::vector<std::int64_t>>();
    if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
      fail(ErrorKind::FormatError, where + ": dims must be three positive integers");
    }
    s.dims = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
              static_cast<std::size_t>(dims[2])};
    const auto sp = doc.at("spacing_mm").get<std::vector<double>>();
    if (sp.size() != 3 || !(sp[0] > 0 && sp[1] > 0 && sp[2] > 0)) {
      fail(ErrorKind::FormatError, where + ": spacing_mm must be three positive numbers");
    }
    s.spacing = {sp[0], sp[1], sp[2]};
    const auto range = doc.at("intensity_range").get<std::vector<double>>();
    if (range.size() != 2) fail(ErrorKind::FormatError, where + ": intensity_range must be [min, max]");
    s.range = {range[0], range[1]};
    s.kind = doc.at("kind").get<std::string>();
    if (s.kind != "real" && s.kind != "complex-interleaved") {
      fail(ErrorKind::FormatError, where + ": unknown kind '" + s.kind + "'");
    }
    if (doc.contains("layout") && doc["layout"].get<std::string>() == "per-slice-2D") {
      s.layout = KSpaceLayout::PerSlice2D;
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, where + ": " + e.what());
  }
}

inline json make_sidecar(const Dims& d, const Spacing& sp, const IntensityRange& r, const std::string& kind) {
  return json{{"dims", {d.fe, d.pe, d.sl}},
              {"spacing_mm", {sp.fe, sp.pe, sp.sl}},
              {"intensity_range", {r.min, r.max}},
              {"kind", kind}};
}

// Accepts "name", "name.f32raw" or "name.json" and returns the stem path.
inline fs::path native_stem(const fs::path& path) {
  if (path.extension() == ".f32raw" || path.extension() == ".json") {
    fs::path stem = path;
    return stem.replace_extension();
  }
  return path;
}

inline fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

// NIfTI-1 single-file header field offsets.
constexpr std::size_t kNiftiHeaderSize = 348;

inline Volume load_nifti(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < kNiftiHeaderSize) fail(ErrorKind::FormatError, "'" + path.string() + "' is too short for NIfTI-1");

  bool swap = false;
  auto i32 = [&](std::size_t off) {
    auto v = read_le<std::int32_t>(bytes.data() + off);
    return swap ? byteswap_value(v) : v;
  };
  auto i16 = [&](std::size_t off) {
    auto v = read_le<std::int16_t>(bytes.data() + off);
    return swap ? byteswap_value(v) : v;
  };
  auto f32 = [&](std::size_t off) {
    auto v = read_le<float>(bytes.data() + off);
    return swap ? byteswap_value(v) : v;
  };

  if (i32(0) != 348) {
    swap = true;
    if (i32(0) != 348) fail(ErrorKind::FormatError, "'" + path.string() + "': bad sizeof_hdr");
  }
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) {
    fail(ErrorKind::FormatError, "'" + path.string() + "': not a single-file NIfTI-1 (magic)");
  }

  const int ndim = i16(40);
  if (ndim < 1 || ndim > 7) fail(ErrorKind::FormatError, "'" + path.string() + "': bad dim[0]");
  std::array<std::size_t, 3> dims{1, 1, 1};
  for (int a = 0; a < ndim; ++a) {
    const int n = i16(42 + 2 * a);
    if (n < 1) fail(ErrorKind::FormatError, "'" + path.string() + "': non-positive dimension");
    if (a < 3) {
      dims[a] = static_cast<std::size_t>(n);
    } else if (n != 1) {
      fail(ErrorKind::FormatError, "'" + path.string() + "': only 3D volumes are supported");
    }
  }
  const int datatype = i16(70);
  std::size_t bytes_per_voxel = 0;
  if (datatype == 16) {
    bytes_per_voxel = 4;
  } else if (datatype == 4) {
    bytes_per_voxel = 2;
  } else {
    fail(ErrorKind::FormatError, "'" + path.string() + "': unsupported datatype " + std::to_string(datatype));
  }

  Spacing spacing{1.0, 1.0, 1.0};
  double* axes[3] = {&spacing.fe, &spacing.pe, &spacing.sl};
  for (int a = 0; a < 3; ++a) {
    const float p = f32(80 + 4 * a);
    if (p > 0.0f && std::isfinite(p)) *axes[a] = p;
  }

  const float vox_offset = f32(108);
  const auto offset = static_cast<std::size_t>(vox_offset < 352.0f ? 352.0f : vox_offset);
  const float slope = f32(112);
  const float inter = f32(116);
  const bool scaled = slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f);

  const Dims d{dims[0], dims[1], dims[2]};
  if (bytes.size() < offset + d.total() * bytes_per_voxel) {
    fail(ErrorKind::FormatError, "'" + path.string() + "': voxel payload shorter than dims require");
  }
  std::vector<float> out(d.total());
  for (std::size_t n = 0; n < out.size(); ++n) {
    float x;
    if (datatype == 16) {
      x = f32(offset + 4 * n);
    } else {
      x = static_cast<float>(i16(offset + 2 * n));
    }
    out[n] = scaled ? x * slope + inter : x;
  }
  Volume v(d, std::move(out), spacing);
  const auto [lo, hi] = v.minmax();
  return v.with_range({lo, hi});
}

}  // namespace detail

/// Writes `<stem>.f32raw` (little-endian float32, FE fastest) and `<stem>.json`.
inline void store_volume(const Volume& v, const fs::path& path) {
  const auto stem = detail::native_stem(path);
  const auto bytes = detail::encode_f32_le(v.values());
  detail::write_bytes(detail::with_suffix(stem, ".f32raw"), bytes.data(), bytes.size());
  detail::write_json_file(detail::with_suffix(stem, ".json"),
                          detail::make_sidecar(v.dims(), v.spacing(), v.intensity_range(), "real"));
}

inline Volume load_volume(const fs::path& path, VolumeFormat format) {
  if (format == VolumeFormat::Nifti) return detail::load_nifti(path);

  const auto stem = detail::native_stem(path);
  const auto sidecar_path = detail::with_suffix(stem, ".json");
  const auto side = detail::parse_sidecar(detail::read_json_file(sidecar_path), sidecar_path.string());
  if (side.kind != "real") {
    fail(ErrorKind::FormatError, sidecar_path.string() + ": expected a real volume, found " + side.kind);
  }
  const auto bytes = detail::read_bytes(detail::with_suffix(stem, ".f32raw"));
  if (bytes.size() != side.dims.total() * 4) {
    fail(ErrorKind::FormatError, stem.string() + ".f32raw: payload of " + std::to_string(bytes.size()) +
                                     " bytes does not match dims " + to_string(side.dims));
  }
  return Volume(side.dims, detail::decode_f32_le(bytes), side.spacing, side.range);
}

/// Picks the format from the extension: ".nii" is NIfTI-1, anything else native.
inline Volume load_volume(const fs::path& path) {
  return load_volume(path, path.extension() == ".nii" ? VolumeFormat::Nifti : VolumeFormat::Native);
}

/// Complex k-space as interleaved (re, im) float32 with a "complex-interleaved" sidecar.
inline void store_kspace(const KSpaceGrid& k, const fs::path& path) {
  const auto stem = detail::native_stem(path);
  std::vector<float> interleaved;
  interleaved.reserve(2 * k.size());
  for (const auto& z : k.values()) {
    interleaved.push_back(static_cast<float>(z.real()));
    interleaved.push_back(static_cast<float>(z.imag()));
  }
  const auto bytes = detail::encode_f32_le(interleaved);
  detail::write_bytes(detail::with_suffix(stem, ".f32raw"), bytes.data(), bytes.size());
  auto side = detail::make_sidecar(k.dims(), k.spacing(), {0.0, 0.0}, "complex-interleaved");
  side["layout"] = k.layout() == KSpaceLayout::PerSlice2D ? "per-slice-2D" : "volumetric-3D";
  detail::write_json_file(detail::with_suffix(stem, ".json"), side);
}

inline KSpaceGrid load_kspace(const fs::path& path) {
  const auto stem = detail::native_stem(path);
  const auto sidecar_path = detail::with_suffix(stem, ".json");
  const auto side = detail::parse_sidecar(detail::read_json_file(sidecar_path), sidecar_path.string());
  if (side.kind != "complex-interleaved") {
    fail(ErrorKind::FormatError, sidecar_path.string() + ": expected complex-interleaved k-space");
  }
  const auto bytes = detail::read_bytes(detail::with_suffix(stem, ".f32raw"));
  if (bytes.size() != side.dims.total() * 8) {
    fail(ErrorKind::FormatError, stem.string() + ".f32raw: payload does not match dims " + to_string(side.dims));
  }
  const auto floats = detail::decode_f32_le(bytes);
  std::vector<std::complex<double>> data(side.dims.total());
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = {floats[2 * n], floats[2 * n + 1]};
  return KSpaceGrid(side.dims, std::move(data), side.layout, side.spacing);
}

/// FNV-1a over the little-endian float32 payload; used for reproducibility checks.
inline std::uint64_t checksum(const Volume& v) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : detail::encode_f32_le(v.values())) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace mrb
