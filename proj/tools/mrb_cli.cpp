// mrb: command-line front end over the mrb library.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Failures print one
// JSON object {"error": kind, "message": text} on stderr.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mrb/mrb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void print_error(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

mrb::Dims parse_dims(const std::string& text) {
  std::vector<std::size_t> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find_first_of("x,", start);
    const auto cell = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos) {
      mrb::fail(mrb::ErrorKind::InvalidPattern, "dims must look like 64x64x48, got '" + text + "'");
    }
    parts.push_back(std::stoul(cell));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (parts.size() != 3) mrb::fail(mrb::ErrorKind::InvalidPattern, "dims need three axes, got '" + text + "'");
  return {parts[0], parts[1], parts[2]};
}

// "yaw/pitch" in degrees; a bare number means yaw only.
std::pair<double, double> parse_pattern(const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    const double yaw = std::stod(text.substr(0, slash), &used);
    if (used != text.substr(0, slash).size()) throw std::invalid_argument(text);
    double pitch = 0.0;
    if (slash != std::string::npos) {
      const auto rest = text.substr(slash + 1);
      pitch = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(text);
    }
    return {yaw, pitch};
  } catch (const std::exception&) {
    mrb::fail(mrb::ErrorKind::InvalidPattern, "pattern must be yaw or yaw/pitch in degrees, got '" + text + "'");
  }
}

// Turns a parsing helper into a CLI11 validator so bad values are usage errors.
template <typename Fn>
CLI::Validator checked(Fn fn, const std::string& name) {
  return CLI::Validator(
      [fn](std::string& value) -> std::string {
        try {
          fn(value);
          return {};
        } catch (const mrb::Error& e) {
          return e.what();
        }
      },
      name);
}

void require_input(const fs::path& path) {
  if (fs::exists(path)) return;
  // Native volumes may be named by stem.
  if (fs::exists(fs::path(path).concat(".json")) || fs::exists(fs::path(path).concat(".f32raw"))) return;
  mrb::fail(mrb::ErrorKind::IoError, "input '" + path.string() + "' does not exist");
}

std::string volume_id(const fs::path& path) {
  auto stem = path.filename();
  while (stem.has_extension()) stem = stem.stem();
  return stem.string();
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

json dry_run_report(const std::string& command, const json& plan) {
  return {{"dry_run", true}, {"command", command}, {"plan", plan}};
}

mrb::MotionPattern make_pattern(std::size_t ts, const std::string& pattern, std::size_t echoes,
                                const std::string& trajectory, const std::string& cycle) {
  mrb::MotionPattern p;
  p.t_s_eg = ts;
  std::tie(p.yaw_deg, p.pitch_deg) = parse_pattern(pattern);
  p.eg_echoes = echoes;
  p.trajectory = mrb::parse_trajectory(trajectory);
  p.cycle = cycle == "literal" ? mrb::CycleVariant::LiteralSteps : mrb::CycleVariant::RatioConsistent;
  return p;
}

json strategy_report(const mrb::DownsampleStrategy& s, const mrb::Dims& out_dims, double imag_residue) {
  const auto acc = s.acceleration_factor();
  const auto ret = s.retention_ratio();
  return {{"strategy", s.name()},
          {"zero_fill", s.zero_fill},
          {"acceleration", acc.value()},
          {"acceleration_fraction", to_string(acc)},
          {"retention", ret.value()},
          {"retention_fraction", to_string(ret)},
          {"output_dims", {out_dims.fe, out_dims.pe, out_dims.sl}},
          {"relative_imag_residue", imag_residue}};
}

// ---- pipeline manifest ----------------------------------------------------

struct InputSpec {
  std::optional<fs::path> path;
  mrb::PhantomKind phantom = mrb::PhantomKind::Ellipsoid;
  mrb::Dims dims{};
  std::string id;
};

struct Manifest {
  int version = 1;
  std::vector<InputSpec> inputs;
  std::optional<mrb::DownsampleStrategy> strategy;
  std::optional<mrb::MotionDescriptor> motion;
  std::optional<mrb::PatchSpec> patch;
  fs::path outputs;
  std::uint64_t seed = 0;
};

Manifest parse_manifest(const fs::path& path) {
  const auto j = mrb::detail::read_json_file(path);
  mrb::detail::reject_unknown(j, {"version", "inputs", "strategy", "motion", "patch", "outputs", "seed"}, "manifest");
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != 1) mrb::fail(mrb::ErrorKind::ManifestError, "unsupported manifest version");
    m.outputs = j.at("outputs").get<std::string>();
    m.seed = j.value("seed", std::uint64_t{0});
    const auto& inputs = j.at("inputs");
    if (!inputs.is_array() || inputs.empty()) mrb::fail(mrb::ErrorKind::ManifestError, "inputs must be a non-empty list");
    for (const auto& in : inputs) {
      InputSpec s;
      if (in.is_string()) {
        s.path = fs::path(in.get<std::string>());
        if (s.path->is_relative()) s.path = path.parent_path() / *s.path;
        require_input(*s.path);
        s.id = volume_id(*s.path);
      } else {
        mrb::detail::reject_unknown(in, {"phantom", "dims", "id"}, "input");
        s.phantom = mrb::parse_phantom_kind(in.at("phantom").get<std::string>());
        const auto d = in.at("dims").get<std::vector<std::size_t>>();
        if (d.size() != 3) mrb::fail(mrb::ErrorKind::ManifestError, "input dims need three entries");
        s.dims = {d[0], d[1], d[2]};
        s.id = in.value("id", "phantom" + std::to_string(m.inputs.size()));
      }
      m.inputs.push_back(std::move(s));
    }
    if (j.contains("strategy")) m.strategy = mrb::strategy_from_json(j["strategy"]);
    if (j.contains("motion")) m.motion = mrb::motion_from_json(j["motion"]);
    if (j.contains("patch")) m.patch = mrb::patch_spec_from_json(j["patch"]);
  } catch (const json::exception& e) {
    mrb::fail(mrb::ErrorKind::ManifestError, std::string("manifest: ") + e.what());
  }
  if (m.outputs.is_relative()) m.outputs = path.parent_path() / m.outputs;
  return m;
}

// Each input gets its own seed stream so results do not depend on input order.
mrb::Volume load_input(const InputSpec& in, std::uint64_t seed, std::size_t index) {
  if (in.path) return mrb::load_volume(*in.path);
  return mrb::make_phantom(in.phantom, in.dims, seed * 1000003ULL + index);
}

int run_manifest(const Manifest& m) {
  struct Outcome {
    std::vector<std::pair<std::string, std::uint64_t>> checksums;
    std::optional<mrb::QualityReport> quality;
    json report;
  };
  std::vector<Outcome> outcomes(m.inputs.size());
  fs::create_directories(m.outputs);

  mrb::parallel_for(m.inputs.size(), [&](std::size_t n) {
    const auto& in = m.inputs[n];
    auto& out = outcomes[n];
    const auto reference = mrb::normalize(load_input(in, m.seed, n));
    auto current = reference;
    out.report["id"] = in.id;
    auto save = [&](const mrb::Volume& v, const std::string& suffix) {
      const auto name = in.id + suffix;
      mrb::store_volume(v, m.outputs / name);
      out.checksums.emplace_back(name, mrb::checksum(v));
    };
    save(reference, "_input");

    if (m.motion) {
      const std::size_t lines = reference.dims().pe * reference.dims().sl;
      if (m.motion->total_lines && *m.motion->total_lines != lines) {
        mrb::fail(mrb::ErrorKind::ScheduleMismatch, in.id + ": motion total_lines " +
                                                        std::to_string(*m.motion->total_lines) + " != " +
                                                        std::to_string(lines));
      }
      const auto schedule = mrb::build_schedule(m.motion->pattern, lines);
      current = mrb::apply_motion(reference, schedule);
      save(current, "_motion");
      mrb::write_mask_csv(m.outputs / (in.id + "_mask.csv"), schedule);
      out.quality = mrb::evaluate(current, reference);
      out.report["corrupted_ratio"] = mrb::corrupted_ratio(schedule);
    }
    if (m.strategy) {
      const auto r = mrb::downsample_detailed(current, *m.strategy);
      current = r.volume;
      save(current, "_lr");
      out.report["degrade"] = strategy_report(*m.strategy, current.dims(), r.relative_imag_residue);
    }
    if (m.patch) {
      const auto ps = mrb::crop(current, *m.patch);
      mrb::store_patch_set(ps, m.outputs / (in.id + "_patches"));
      out.report["patches"] = ps.patches.size();
    }
    if (out.quality) out.report["quality"] = mrb::to_json(*out.quality);
  });

  json checksums = json::object();
  json reports = json::array();
  std::optional<mrb::CsvWriter> csv;
  for (std::size_t n = 0; n < outcomes.size(); ++n) {
    for (const auto& [name, sum] : outcomes[n].checksums) checksums[name] = std::to_string(sum);
    reports.push_back(outcomes[n].report);
    if (outcomes[n].quality) {
      if (!csv) csv.emplace(m.outputs / "quality.csv", mrb::kQualityCsvHeader);
      mrb::append_quality_rows(*csv, m.inputs[n].id, *outcomes[n].quality);
    }
  }
  const json summary{{"seed", m.seed}, {"volumes", reports}, {"checksums", checksums}};
  mrb::detail::write_json_file(m.outputs / "checksums.json", checksums);
  mrb::detail::write_json_file(m.outputs / "report.json", summary);
  emit(summary);
  return 0;
}

// ---- calibration helpers --------------------------------------------------

struct Paired {
  std::vector<mrb::SliceKey> keys;
  std::vector<double> u;
  std::vector<double> y;
  std::size_t skipped = 0;
};

// Joins per-slice quality and epistemic tables on (volume_id, slice).
// Slices without a finite target (identical images give PSNR inf) are skipped.
Paired join_tables(const fs::path& quality, const fs::path& epistemic, bool use_psnr) {
  const auto q = mrb::read_quality_csv(quality);
  const auto e = mrb::read_epistemic_csv(epistemic);
  Paired out;
  for (const auto& [key, u] : e) {
    auto it = q.find(key);
    if (it == q.end()) continue;
    const double y = use_psnr ? it->second.psnr : it->second.ssim;
    if (!std::isfinite(y) || !std::isfinite(u)) {
      ++out.skipped;
      continue;
    }
    out.keys.push_back(key);
    out.u.push_back(u);
    out.y.push_back(y);
  }
  if (out.u.empty()) mrb::fail(mrb::ErrorKind::DegenerateInput, "no (volume_id, slice) rows shared by the two tables");
  return out;
}

void write_series(const fs::path& path, const Paired& data, const mrb::CalibrationModel& model, std::size_t points) {
  mrb::CsvWriter w(path, {"series", "u", "value"});
  for (std::size_t n = 0; n < data.u.size(); ++n) {
    w.row({"scatter", mrb::format_number(data.u[n]), mrb::format_number(data.y[n])});
  }
  const auto [lo, hi] = std::minmax_element(data.u.begin(), data.u.end());
  for (std::size_t n = 0; n < points; ++n) {
    const double u = *lo + (*hi - *lo) * static_cast<double>(n) / static_cast<double>(points - 1);
    const auto p = mrb::predict_quality(u, model);
    w.row({"curve", mrb::format_number(u), mrb::format_number(p.estimate)});
    w.row({"pi_low", mrb::format_number(u), mrb::format_number(p.pi_low)});
    w.row({"pi_high", mrb::format_number(u), mrb::format_number(p.pi_high)});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRI restoration benchmark tools: degradation, motion, patches, metrics, calibration"};
  app.require_subcommand(1);
  app.fallthrough();
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "Validate arguments and inputs; write nothing");

  const auto strategy_check = checked([](const std::string& s) { mrb::parse_strategy(s); }, "STRATEGY");
  const auto dims_check = checked([](const std::string& s) { parse_dims(s); }, "DIMS");
  const auto pattern_check = checked([](const std::string& s) { parse_pattern(s); }, "YAW[/PITCH]");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic volume");
  std::string ph_kind = "ellipsoid", ph_dims = "64x64x64";
  std::uint64_t ph_seed = 0;
  std::size_t ph_cutoff = 8;
  fs::path ph_out;
  phantom->add_option("--kind", ph_kind, "ellipsoid | bandlimited | noise")
      ->check(CLI::IsMember({"ellipsoid", "bandlimited", "noise"}));
  phantom->add_option("--dims", ph_dims, "FExPExSL")->check(dims_check);
  phantom->add_option("--seed", ph_seed);
  phantom->add_option("--cutoff", ph_cutoff, "Band-limit cutoff (bandlimited only)");
  phantom->add_option("--out", ph_out)->required();

  // degrade
  auto* degrade = app.add_subcommand("degrade", "k-space truncation downsampling");
  fs::path dg_in, dg_out;
  std::string dg_strategy;
  bool dg_zero_fill = false;
  degrade->add_option("--input", dg_in)->required();
  degrade->add_option("--strategy", dg_strategy, "FExPExSL scale such as 1x1x2, or 'catalog'")
      ->required()
      ->check(strategy_check | CLI::IsMember({"catalog"}));
  degrade->add_flag("--zero-fill", dg_zero_fill, "Keep dims, zero the discarded k-space");
  degrade->add_option("--out", dg_out, "Output volume (a directory for 'catalog')")->required();

  // motion
  auto* motion = app.add_subcommand("motion", "Synthesize rotational motion artifacts");
  fs::path mo_in, mo_out, mo_mask;
  std::size_t mo_ts = 9, mo_echoes = 80;
  std::string mo_pattern = "5/0", mo_traj = "centric", mo_cycle = "ratio";
  motion->add_option("--input", mo_in)->required();
  motion->add_option("--ts", mo_ts, "Stay duration in echo groups")->check(CLI::PositiveNumber);
  motion->add_option("--pattern", mo_pattern, "Rotation yaw/pitch in degrees")->check(pattern_check);
  motion->add_option("--echoes", mo_echoes, "Lines per echo group")->check(CLI::PositiveNumber);
  motion->add_option("--trajectory", mo_traj)->check(CLI::IsMember({"centric", "linear"}));
  motion->add_option("--cycle", mo_cycle)->check(CLI::IsMember({"ratio", "literal"}));
  motion->add_option("--out", mo_out)->required();
  motion->add_option("--mask", mo_mask, "Per-line corruption CSV");

  // patch
  auto* patch = app.add_subcommand("patch", "Crop a volume into overlapping patches");
  fs::path pa_in, pa_out;
  mrb::PatchSpec pa_spec;
  patch->add_option("--input", pa_in)->required();
  patch->add_option("--size", pa_spec.in_plane_size);
  patch->add_option("--overlap", pa_spec.in_plane_overlap);
  patch->add_option("--slices", pa_spec.slices_per_patch);
  patch->add_option("--slice-overlap", pa_spec.slice_overlap);
  patch->add_option("--out", pa_out, "Patch directory")->required();

  // assemble
  auto* assemble = app.add_subcommand("assemble", "Reassemble a patch directory");
  fs::path as_in, as_out;
  assemble->add_option("--input", as_in, "Patch directory")->required();
  assemble->add_option("--out", as_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "SSIM / PSNR against a reference");
  fs::path ev_restored, ev_reference, ev_json, ev_csv, ev_map;
  std::string ev_id;
  std::size_t ev_window = mrb::kDefaultSsimWindow;
  evaluate->add_option("--restored", ev_restored)->required();
  evaluate->add_option("--reference", ev_reference)->required();
  evaluate->add_option("--id", ev_id, "volume_id for CSV rows (default: restored file stem)");
  evaluate->add_option("--window", ev_window, "SSIM window (odd)");
  evaluate->add_option("--json", ev_json, "QualityReport JSON");
  evaluate->add_option("--csv", ev_csv, "Per-slice quality CSV");
  evaluate->add_option("--map", ev_map, "SSIM map volume");

  // uncertainty
  auto* uncertainty = app.add_subcommand("uncertainty", "Moments of NIG parameter maps");
  fs::path un_gamma, un_v, un_alpha, un_beta, un_out, un_csv;
  std::string un_id;
  uncertainty->add_option("--gamma", un_gamma)->required();
  uncertainty->add_option("--v", un_v)->required();
  uncertainty->add_option("--alpha", un_alpha)->required();
  uncertainty->add_option("--beta", un_beta)->required();
  uncertainty->add_option("--out", un_out, "Directory for prediction/aleatoric/epistemic")->required();
  uncertainty->add_option("--csv", un_csv, "Per-slice mean epistemic CSV");
  uncertainty->add_option("--id", un_id, "volume_id for CSV rows");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit quality against mean epistemic uncertainty");
  fs::path ca_quality, ca_epi, ca_model, ca_series;
  std::string ca_metric = "ssim";
  double ca_level = 0.95;
  calibrate->add_option("--quality", ca_quality, "Quality CSV")->required();
  calibrate->add_option("--epistemic", ca_epi, "Epistemic CSV")->required();
  calibrate->add_option("--metric", ca_metric, "ssim (linear) | psnr (exponential)")
      ->check(CLI::IsMember({"ssim", "psnr"}));
  calibrate->add_option("--level", ca_level, "Prediction interval level")->check(CLI::Range(0.5, 0.999));
  calibrate->add_option("--model", ca_model, "CalibrationModel JSON")->required();
  calibrate->add_option("--series", ca_series, "Scatter, curve and interval CSV series");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict quality from mean epistemic uncertainty");
  fs::path pr_model, pr_epi, pr_out;
  predict->add_option("--model", pr_model)->required();
  predict->add_option("--epistemic", pr_epi)->required();
  predict->add_option("--out", pr_out, "Predictions CSV")->required();

  // run
  auto* run = app.add_subcommand("run", "Execute a pipeline manifest");
  fs::path ru_manifest;
  run->add_option("manifest", ru_manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (phantom->parsed()) {
      const auto dims = parse_dims(ph_dims);
      const auto kind = mrb::parse_phantom_kind(ph_kind);
      if (dry_run) {
        emit(dry_run_report("phantom", {{"kind", ph_kind}, {"dims", ph_dims}, {"out", ph_out}}));
        return 0;
      }
      mrb::PhantomOptions opt;
      opt.cutoff = ph_cutoff;
      const auto v = mrb::make_phantom(kind, dims, ph_seed, opt);
      mrb::store_volume(v, ph_out);
      emit({{"out", ph_out}, {"checksum", std::to_string(mrb::checksum(v))}});
    } else if (degrade->parsed()) {
      require_input(dg_in);
      std::vector<mrb::DownsampleStrategy> strategies;
      const bool catalog = dg_strategy == "catalog";
      if (catalog) {
        for (const auto& e : mrb::strategy_catalog()) {
          auto s = e.strategy;
          s.zero_fill = dg_zero_fill;
          strategies.push_back(s);
        }
      } else {
        strategies.push_back(mrb::parse_strategy(dg_strategy, dg_zero_fill));
      }
      if (dry_run) {
        json names = json::array();
        for (const auto& s : strategies) names.push_back(s.name());
        emit(dry_run_report("degrade", {{"input", dg_in}, {"strategies", names}, {"out", dg_out}}));
        return 0;
      }
      const auto hr = mrb::normalize(mrb::load_volume(dg_in));
      json reports = json::array();
      for (const auto& s : strategies) {
        const auto r = mrb::downsample_detailed(hr, s);
        const fs::path out = catalog ? dg_out / ("lr_" + s.name()) : dg_out;
        mrb::store_volume(r.volume, out);
        auto rep = strategy_report(s, r.volume.dims(), r.relative_imag_residue);
        rep["out"] = out;
        reports.push_back(rep);
      }
      emit(catalog ? reports : reports[0]);
    } else if (motion->parsed()) {
      require_input(mo_in);
      const auto pattern = make_pattern(mo_ts, mo_pattern, mo_echoes, mo_traj, mo_cycle);
      if (dry_run) {
        emit(dry_run_report("motion", mrb::to_json(pattern, 0)));
        return 0;
      }
      const auto v = mrb::normalize(mrb::load_volume(mo_in));
      const auto schedule = mrb::build_schedule(pattern, v.dims().pe * v.dims().sl);
      const auto out = mrb::apply_motion(v, schedule);
      mrb::store_volume(out, mo_out);
      if (!mo_mask.empty()) mrb::write_mask_csv(mo_mask, schedule);
      emit({{"out", mo_out},
            {"motion", mrb::to_json(pattern, schedule.total_lines())},
            {"corrupted_ratio", mrb::corrupted_ratio(schedule)},
            {"events", schedule.events().size()}});
    } else if (patch->parsed()) {
      require_input(pa_in);
      pa_spec.validate();
      if (dry_run) {
        emit(dry_run_report("patch", {{"input", pa_in}, {"spec", mrb::to_json(pa_spec)}, {"out", pa_out}}));
        return 0;
      }
      const auto ps = mrb::crop(mrb::load_volume(pa_in), pa_spec);
      mrb::store_patch_set(ps, pa_out);
      emit({{"out", pa_out}, {"patches", ps.patches.size()}});
    } else if (assemble->parsed()) {
      require_input(as_in / "manifest.json");
      if (dry_run) {
        emit(dry_run_report("assemble", {{"input", as_in}, {"out", as_out}}));
        return 0;
      }
      const auto v = mrb::assemble(mrb::load_patch_set(as_in));
      mrb::store_volume(v, as_out);
      emit({{"out", as_out}, {"checksum", std::to_string(mrb::checksum(v))}});
    } else if (evaluate->parsed()) {
      require_input(ev_restored);
      require_input(ev_reference);
      if (dry_run) {
        emit(dry_run_report("evaluate", {{"restored", ev_restored}, {"reference", ev_reference}}));
        return 0;
      }
      const auto restored = mrb::load_volume(ev_restored);
      const auto reference = mrb::load_volume(ev_reference);
      const auto report = mrb::evaluate(restored, reference, ev_window, !ev_map.empty());
      const auto j = mrb::to_json(report);
      if (!ev_json.empty()) mrb::detail::write_json_file(ev_json, j);
      if (!ev_csv.empty()) {
        mrb::CsvWriter w(ev_csv, mrb::kQualityCsvHeader);
        mrb::append_quality_rows(w, ev_id.empty() ? volume_id(ev_restored) : ev_id, report);
      }
      if (report.ssim_map) mrb::store_volume(*report.ssim_map, ev_map);
      emit(j);
    } else if (uncertainty->parsed()) {
      for (const auto& p : {un_gamma, un_v, un_alpha, un_beta}) require_input(p);
      if (dry_run) {
        emit(dry_run_report("uncertainty", {{"out", un_out}}));
        return 0;
      }
      const mrb::NigMaps maps{mrb::load_volume(un_gamma), mrb::load_volume(un_v), mrb::load_volume(un_alpha),
                              mrb::load_volume(un_beta)};
      const auto m = mrb::nig_moments(maps);
      mrb::store_volume(m.prediction, un_out / "prediction");
      mrb::store_volume(m.aleatoric, un_out / "aleatoric");
      mrb::store_volume(m.epistemic, un_out / "epistemic");
      const auto means = mrb::mean_epistemic_per_slice(m.epistemic);
      if (!un_csv.empty()) {
        mrb::CsvWriter w(un_csv, mrb::kEpistemicCsvHeader);
        const auto id = un_id.empty() ? volume_id(un_gamma) : un_id;
        for (const auto& s : means) w.row({id, std::to_string(s.slice), mrb::format_number(s.value)});
      }
      emit({{"out", un_out}, {"slices", means.size()}});
    } else if (calibrate->parsed()) {
      require_input(ca_quality);
      require_input(ca_epi);
      const bool psnr = ca_metric == "psnr";
      const auto data = join_tables(ca_quality, ca_epi, psnr);
      if (dry_run) {
        emit(dry_run_report("calibrate", {{"metric", ca_metric}, {"rows", data.u.size()}}));
        return 0;
      }
      const auto model = psnr ? mrb::fit_exponential(data.u, data.y, {}, ca_level)
                              : mrb::fit_linear(data.u, data.y, ca_level);
      mrb::detail::write_json_file(ca_model, mrb::to_json(model));
      if (!ca_series.empty()) write_series(ca_series, data, model, 101);
      auto j = mrb::to_json(model);
      j["skipped_rows"] = data.skipped;
      emit(j);
    } else if (predict->parsed()) {
      require_input(pr_model);
      require_input(pr_epi);
      const auto model = mrb::calibration_from_json(mrb::detail::read_json_file(pr_model));
      const auto epi = mrb::read_epistemic_csv(pr_epi);
      if (dry_run) {
        emit(dry_run_report("predict", {{"model", to_string(model.kind)}, {"rows", epi.size()}}));
        return 0;
      }
      mrb::CsvWriter w(pr_out, {"volume_id", "slice", "mean_epistemic", "estimate", "pi_low", "pi_high"});
      for (const auto& [key, u] : epi) {
        const auto p = mrb::predict_quality(u, model);
        w.row({key.first, std::to_string(key.second), mrb::format_number(u), mrb::format_number(p.estimate),
               mrb::format_number(p.pi_low), mrb::format_number(p.pi_high)});
      }
      emit({{"out", pr_out}, {"rows", epi.size()}});
    } else if (run->parsed()) {
      require_input(ru_manifest);
      const auto m = parse_manifest(ru_manifest);
      if (dry_run) {
        emit(dry_run_report("run", {{"inputs", m.inputs.size()}, {"outputs", m.outputs}}));
        return 0;
      }
      return run_manifest(m);
    }
  } catch (const mrb::Error& e) {
    print_error(to_string(e.kind()), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitRuntime;
  }
  return 0;
}
