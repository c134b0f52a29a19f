#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mrb/formats.hpp"
#include "mrb/io.hpp"
#include "mrb/quality.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::string& args) {
  const auto err_path = testing_util::scratch("stderr.txt");
  const std::string cmd = std::string(MRB_CLI_PATH) + " " + args + " 2>" + err_path.string();
  Result r{0, {}, {}};
  FILE* pipe = popen(cmd.c_str(), "r");
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err_path);
  std::stringstream ss;
  ss << e.rdbuf();
  r.err = ss.str();
  return r;
}

std::string p(const fs::path& path) { return path.string(); }

fs::path make_phantom(const std::string& name, const std::string& dims, int seed = 1) {
  const auto path = testing_util::scratch(name);
  const auto r = cli("phantom --kind ellipsoid --dims " + dims + " --seed " + std::to_string(seed) + " --out " + p(path));
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

}  // namespace

TEST(Cli, DegradeReportsStrategy) {
  const auto in = make_phantom("cli_hr", "64x64x64");
  const auto out = testing_util::scratch("cli_lr");
  const auto r = cli("degrade --input " + p(in) + " --strategy 1x1x2 --out " + p(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("acceleration"), 2.0);
  EXPECT_EQ(j.at("retention"), 0.5);
  EXPECT_EQ(mrb::load_volume(out).dims(), (mrb::Dims{64, 64, 32}));
}

TEST(Cli, IdentityStrategyCopiesModuloRenormalization) {
  const auto in = make_phantom("cli_id_hr", "32x32x32");
  const auto out = testing_util::scratch("cli_id_lr");
  ASSERT_EQ(cli("degrade --input " + p(in) + " --strategy 1x1x1 --out " + p(out)).code, 0);
  const auto a = mrb::normalize(mrb::load_volume(in));
  const auto b = mrb::load_volume(out);
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(double(a.values()[n]) - b.values()[n]));
  EXPECT_LT(m, 1e-6);
}

TEST(Cli, InvalidStrategyIsUsageError) {
  const auto in = make_phantom("cli_bad", "16x16x16");
  const auto r = cli("degrade --input " + p(in) + " --strategy 2x2 --out " + p(testing_util::scratch("never")));
  EXPECT_EQ(r.code, 2);
  const auto j = json::parse(r.err);
  EXPECT_EQ(j.at("error"), "UsageError");
  EXPECT_FALSE(fs::exists(testing_util::scratch("never.json")));
}

TEST(Cli, RuntimeErrorIsJsonWithExitOne) {
  const auto in = make_phantom("cli_indiv", "16x16x16");
  const auto r = cli("degrade --input " + p(in) + " --strategy 1x1x3 --out " + p(testing_util::scratch("x")));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err).at("error"), "IndivisibleDims");
  const auto missing = cli("evaluate --restored /nonexistent/a --reference /nonexistent/b");
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(json::parse(missing.err).at("error"), "IoError");
}

TEST(Cli, MotionSeverityOrdering) {
  const auto in = make_phantom("cli_mo", "64x64x32");
  double ssim[2];
  int n = 0;
  for (const char* ts : {"9", "72"}) {
    const auto out = testing_util::scratch(std::string("cli_mo_") + ts);
    const auto mask = testing_util::scratch(std::string("cli_mo_mask_") + ts + ".csv");
    const auto r = cli("motion --input " + p(in) + " --ts " + ts + " --pattern 5/5 --echoes 2 --out " + p(out) +
                       " --mask " + p(mask));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(mask));
    const auto e = cli("evaluate --restored " + p(out) + " --reference " + p(in));
    ASSERT_EQ(e.code, 0) << e.err;
    ssim[n++] = json::parse(e.out).at("ssim").get<double>();
  }
  EXPECT_LT(ssim[0], ssim[1]);
}

TEST(Cli, PatchThenAssembleIsIdentity) {
  const auto in = make_phantom("cli_pa", "40x36x20");
  const auto dir = testing_util::scratch("cli_pa_dir");
  const auto out = testing_util::scratch("cli_pa_out");
  ASSERT_EQ(cli("patch --input " + p(in) + " --size 16 --overlap 4 --slices 3 --slice-overlap 2 --out " + p(dir)).code,
            0);
  ASSERT_EQ(cli("assemble --input " + p(dir) + " --out " + p(out)).code, 0);
  EXPECT_EQ(mrb::load_volume(out), mrb::load_volume(in));
}

TEST(Cli, CalibrateAndPredict) {
  const auto q = testing_util::scratch("cli_q.csv");
  const auto e = testing_util::scratch("cli_e.csv");
  {
    mrb::CsvWriter wq(q, mrb::kQualityCsvHeader), we(e, mrb::kEpistemicCsvHeader);
    for (int k = 0; k < 20; ++k) {
      const double u = 0.01 + 0.002 * k;
      wq.row({"vol", std::to_string(k), mrb::format_number(0.98 - 2.0 * u), "inf"});
      we.row({"vol", std::to_string(k), mrb::format_number(u)});
    }
  }
  const auto model = testing_util::scratch("cli_model.json");
  const auto series = testing_util::scratch("cli_series.csv");
  const auto r = cli("calibrate --quality " + p(q) + " --epistemic " + p(e) + " --metric ssim --model " + p(model) +
                     " --series " + p(series));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(series));

  const auto preds = testing_util::scratch("cli_pred.csv");
  ASSERT_EQ(cli("predict --model " + p(model) + " --epistemic " + p(e) + " --out " + p(preds)).code, 0);
  const auto rows = mrb::read_csv(preds, {"volume_id", "slice", "mean_epistemic", "estimate", "pi_low", "pi_high"});
  ASSERT_EQ(rows.size(), 20u);
  for (const auto& row : rows) {
    // Noiseless model: zero-width intervals.
    EXPECT_NEAR(mrb::parse_number(row[5]) - mrb::parse_number(row[4]), 0.0, 1e-9);
    EXPECT_NEAR(mrb::parse_number(row[3]), 0.98 - 2.0 * mrb::parse_number(row[2]), 1e-9);
  }
  // PSNR column is all inf: nothing left to fit.
  const auto bad = cli("calibrate --quality " + p(q) + " --epistemic " + p(e) + " --metric psnr --model " +
                       p(testing_util::scratch("cli_model2.json")));
  EXPECT_EQ(bad.code, 1);
}

namespace {

fs::path write_manifest(const std::string& name, const json& body) {
  const auto path = testing_util::scratch(name);
  std::ofstream(path) << body.dump(2);
  return path;
}

json pipeline(const fs::path& outputs) {
  return {{"version", 1},
          {"inputs", {{{"phantom", "ellipsoid"}, {"dims", {32, 32, 16}}, {"id", "a"}},
                      {{"phantom", "bandlimited"}, {"dims", {32, 32, 16}}, {"id", "b"}}}},
          {"motion", {{"t_s_eg", 9}, {"eg_echoes", 2}, {"yaw_deg", 5}, {"pitch_deg", 5}}},
          {"strategy", {{"scale", {1, 1, 2}}}},
          {"patch", {{"in_plane_size", 16}, {"in_plane_overlap", 4}, {"slices_per_patch", 1}}},
          {"outputs", outputs.string()},
          {"seed", 7}};
}

}  // namespace

TEST(Cli, ManifestRunIsReproducible) {
  const auto out1 = testing_util::scratch("run1");
  const auto out2 = testing_util::scratch("run2");
  ASSERT_EQ(cli("run " + p(write_manifest("m1.json", pipeline(out1)))).code, 0);
  ASSERT_EQ(cli("run " + p(write_manifest("m2.json", pipeline(out2)))).code, 0);
  const auto c1 = mrb::detail::read_json_file(out1 / "checksums.json");
  const auto c2 = mrb::detail::read_json_file(out2 / "checksums.json");
  EXPECT_EQ(c1, c2);
  EXPECT_EQ(c1.size(), 6u);  // input, motion, lr per volume
  EXPECT_TRUE(fs::exists(out1 / "quality.csv"));
  EXPECT_TRUE(fs::exists(out1 / "a_patches" / "manifest.json"));
  EXPECT_EQ(mrb::load_volume(out1 / "a_lr").dims(), (mrb::Dims{32, 32, 8}));
}

TEST(Cli, ManifestRejectsUnknownFields) {
  auto m = pipeline(testing_util::scratch("run_bad"));
  m["colour"] = "blue";
  const auto r = cli("run " + p(write_manifest("m_bad.json", m)));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err).at("error"), "ManifestError");
}

TEST(Cli, DryRunTouchesNothing) {
  const auto in = make_phantom("cli_dry", "16x16x16");
  const auto out = testing_util::scratch("dry_out");
  const auto r = cli("--dry-run degrade --input " + p(in) + " --strategy catalog --out " + p(out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).at("dry_run").get<bool>());
  EXPECT_FALSE(fs::exists(out));

  const auto run_out = testing_util::scratch("dry_run_out");
  ASSERT_EQ(cli("run --dry-run " + p(write_manifest("m_dry.json", pipeline(run_out)))).code, 0);
  EXPECT_FALSE(fs::exists(run_out));

  const auto ph = testing_util::scratch("dry_phantom");
  ASSERT_EQ(cli("phantom --dims 16x16x16 --out " + p(ph) + " --dry-run").code, 0);
  EXPECT_FALSE(fs::exists(fs::path(ph).concat(".json")));
}
