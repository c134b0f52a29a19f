#pragma once

// Text interchange formats: strategy and motion descriptors (JSON) and the
// per-slice CSV tables passed between evaluation, calibration and prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mrb/degrade.hpp"
#include "mrb/error.hpp"
#include "mrb/motion.hpp"
#include "mrb/quality.hpp"

namespace mrb {

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& what) {
  if (!j.is_object()) fail(ErrorKind::ManifestError, what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::ManifestError, "unknown " + what + " field '" + key + "'");
    }
  }
}

}  // namespace detail

// {scale: [fe, pe, sl], zero_fill: bool}
inline nlohmann::json to_json(const DownsampleStrategy& s) {
  return {{"scale", s.scale}, {"zero_fill", s.zero_fill}};
}

inline DownsampleStrategy strategy_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"scale", "zero_fill"}, "strategy");
  try {
    const auto sc = j.at("scale").get<std::vector<std::size_t>>();
    if (sc.size() != 3 || sc[0] == 0 || sc[1] == 0 || sc[2] == 0) {
      fail(ErrorKind::ManifestError, "strategy scale must be three positive integers");
    }
    return {{sc[0], sc[1], sc[2]}, j.value("zero_fill", false)};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ManifestError, std::string("strategy: ") + e.what());
  }
}

// {t_s_eg, eg_echoes, trajectory, yaw_deg, pitch_deg, total_lines, cycle}
struct MotionDescriptor {
  MotionPattern pattern;
  std::optional<std::size_t> total_lines;
};

inline nlohmann::json to_json(const MotionPattern& p, std::size_t total_lines) {
  return {{"t_s_eg", p.t_s_eg},
          {"eg_echoes", p.eg_echoes},
          {"trajectory", to_string(p.trajectory)},
          {"yaw_deg", p.yaw_deg},
          {"pitch_deg", p.pitch_deg},
          {"total_lines", total_lines},
          {"cycle", p.cycle == CycleVariant::RatioConsistent ? "ratio" : "literal"}};
}

inline MotionDescriptor motion_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"t_s_eg", "eg_echoes", "trajectory", "yaw_deg", "pitch_deg", "total_lines", "cycle"},
                         "motion");
  try {
    MotionDescriptor d;
    d.pattern.t_s_eg = j.at("t_s_eg").get<std::size_t>();
    d.pattern.eg_echoes = j.value("eg_echoes", std::size_t{80});
    d.pattern.trajectory = parse_trajectory(j.value("trajectory", std::string("centric")));
    d.pattern.yaw_deg = j.value("yaw_deg", 5.0);
    d.pattern.pitch_deg = j.value("pitch_deg", 0.0);
    const auto cycle = j.value("cycle", std::string("ratio"));
    if (cycle == "ratio") {
      d.pattern.cycle = CycleVariant::RatioConsistent;
    } else if (cycle == "literal") {
      d.pattern.cycle = CycleVariant::LiteralSteps;
    } else {
      fail(ErrorKind::ManifestError, "motion cycle must be 'ratio' or 'literal'");
    }
    if (j.contains("total_lines") && !j["total_lines"].is_null()) d.total_lines = j["total_lines"].get<std::size_t>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ManifestError, std::string("motion: ") + e.what());
  }
}

// ---- CSV ------------------------------------------------------------------

using CsvRow = std::vector<std::string>;

inline std::vector<CsvRow> read_csv(const std::filesystem::path& path, const CsvRow& expected_header) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::vector<CsvRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    CsvRow row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (header) {
      if (row != expected_header) fail(ErrorKind::FormatError, "'" + path.string() + "': unexpected CSV header");
      header = false;
      continue;
    }
    if (row.size() != expected_header.size()) {
      fail(ErrorKind::FormatError, "'" + path.string() + "': row has " + std::to_string(row.size()) + " cells");
    }
    rows.push_back(std::move(row));
  }
  if (header) fail(ErrorKind::FormatError, "'" + path.string() + "': empty CSV");
  return rows;
}

inline double parse_number(const std::string& cell) {
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::FormatError, "not a number: '" + cell + "'");
  }
}

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const CsvRow& header) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) fail(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    row(header);
  }

  void row(const CsvRow& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

// Keyed by (volume_id, slice).
using SliceKey = std::pair<std::string, std::size_t>;

inline const CsvRow kQualityCsvHeader{"volume_id", "slice", "ssim", "psnr"};
inline const CsvRow kEpistemicCsvHeader{"volume_id", "slice", "mean_epistemic"};

inline void append_quality_rows(CsvWriter& w, const std::string& volume_id, const QualityReport& r) {
  for (const auto& s : r.per_slice) {
    w.row({volume_id, std::to_string(s.slice), format_number(s.ssim), format_number(s.psnr)});
  }
}

struct QualityRow {
  double ssim;
  double psnr;
};

inline std::map<SliceKey, QualityRow> read_quality_csv(const std::filesystem::path& path) {
  std::map<SliceKey, QualityRow> out;
  for (const auto& r : read_csv(path, kQualityCsvHeader)) {
    out[{r[0], static_cast<std::size_t>(parse_number(r[1]))}] = {parse_number(r[2]), parse_number(r[3])};
  }
  return out;
}

inline std::map<SliceKey, double> read_epistemic_csv(const std::filesystem::path& path) {
  std::map<SliceKey, double> out;
  for (const auto& r : read_csv(path, kEpistemicCsvHeader)) {
    out[{r[0], static_cast<std::size_t>(parse_number(r[1]))}] = parse_number(r[2]);
  }
  return out;
}

/// One row per acquired line: global line index and 0/1 corruption flag.
inline void write_mask_csv(const std::filesystem::path& path, const MotionSchedule& s) {
  CsvWriter w(path, {"line", "corrupted"});
  const auto mask = s.corruption_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) w.row({std::to_string(i), mask[i] ? "1" : "0"});
}

}  // namespace mrb
