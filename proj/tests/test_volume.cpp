#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mrb/io.hpp"
#include "mrb/phantom.hpp"
#include "mrb/fft.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using mrb::Dims;
using mrb::ErrorKind;
using mrb::Volume;

using testing_util::kind_of;
using testing_util::scratch;

TEST(Volume, RejectsBadShapeAndSpacing) {
  EXPECT_EQ(kind_of([] { Volume(Dims{2, 2, 2}, std::vector<float>(7)); }), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([] { Volume(Dims{2, 2, 2}, std::vector<float>(8), {1.0, 0.0, 1.0}); }),
            ErrorKind::DimensionMismatch);
}

TEST(Volume, FeIsFastestAxis) {
  std::vector<float> data(24);
  std::iota(data.begin(), data.end(), 0.0f);
  const Volume v(Dims{2, 3, 4}, data);
  EXPECT_EQ(v(1, 0, 0), 1.0f);
  EXPECT_EQ(v(0, 1, 0), 2.0f);
  EXPECT_EQ(v(0, 0, 1), 6.0f);
  EXPECT_EQ(v.slice(2).front(), 12.0f);
  EXPECT_EQ(v.slab(1, 2).dims(), (Dims{2, 3, 2}));
  EXPECT_EQ(v.slab(1, 2)(0, 0, 0), 6.0f);
}

TEST(Normalize, RampMapsOntoUnitInterval) {
  std::vector<float> data(256);
  std::iota(data.begin(), data.end(), 0.0f);
  const auto n = mrb::normalize(Volume(Dims{16, 16, 1}, data));
  EXPECT_EQ(n.minmax().first, 0.0f);
  EXPECT_EQ(n.minmax().second, 1.0f);
  EXPECT_FLOAT_EQ(n.values()[51], 51.0f / 255.0f);
  EXPECT_EQ(n.intensity_range().min, 0.0);
  EXPECT_EQ(n.intensity_range().max, 255.0);
}

TEST(Normalize, FixedPointAndDegenerate) {
  const auto r = oracle::random_volume({8, 8, 2}, 3);
  std::vector<float> data(r.values().begin(), r.values().end());
  data[0] = 0.0f;
  data[1] = 1.0f;
  const Volume v(r.dims(), data);
  EXPECT_EQ(mrb::normalize(v), v);
  EXPECT_EQ(kind_of([] { mrb::normalize(Volume::filled({4, 4, 4}, 0.7f)); }), ErrorKind::DegenerateRange);
}

TEST(NativeIo, RoundtripIsBitExact) {
  const auto v = oracle::random_volume({7, 5, 3}, 11, -3.0f, 9.0f);
  const auto path = scratch("roundtrip");
  mrb::store_volume(v, path);
  const auto back = mrb::load_volume(fs::path(path).concat(".f32raw"));
  ASSERT_EQ(back.dims(), v.dims());
  EXPECT_EQ(std::memcmp(back.values().data(), v.values().data(), v.size() * sizeof(float)), 0);
  EXPECT_EQ(mrb::checksum(back), mrb::checksum(v));
}

TEST(NativeIo, PayloadMismatchIsFormatError) {
  const auto path = scratch("mismatch");
  mrb::store_volume(oracle::random_volume({4, 4, 4}, 1), path);
  fs::resize_file(fs::path(path).concat(".f32raw"), 4 * 63);
  EXPECT_EQ(kind_of([&] { mrb::load_volume(path); }), ErrorKind::FormatError);
  EXPECT_EQ(kind_of([] { mrb::load_volume(scratch("absent")); }), ErrorKind::IoError);
}

TEST(NativeIo, FullScaleSidecarAccepted) {
  // 320 x 320 x 256 float32: the head-scan matrix size.
  const Dims d{320, 320, 256};
  const auto path = scratch("fullscale");
  mrb::store_volume(Volume::filled(d, 0.25f), path);
  const auto v = mrb::load_volume(path);
  EXPECT_EQ(v.dims(), d);
  EXPECT_EQ(v.values().back(), 0.25f);
}

TEST(KSpaceIo, RoundtripKeepsLayout) {
  const auto k = mrb::fft2_slices(oracle::random_volume({8, 6, 4}, 5));
  const auto path = scratch("kspace");
  mrb::store_kspace(k, path);
  const auto back = mrb::load_kspace(path);
  EXPECT_EQ(back.layout(), mrb::KSpaceLayout::PerSlice2D);
  ASSERT_EQ(back.dims(), k.dims());
  // Stored as float32 pairs.
  for (std::size_t n = 0; n < k.size(); ++n) EXPECT_NEAR(std::abs(back.values()[n] - k.values()[n]), 0.0, 1e-6);
}

namespace {

// Minimal NIfTI-1 single file written byte by byte.
void write_nifti(const fs::path& path, Dims d, short datatype, float slope, float inter,
                 const std::vector<char>& payload) {
  std::vector<char> h(352, 0);
  auto put32 = [&](std::size_t off, std::int32_t v) { std::memcpy(h.data() + off, &v, 4); };
  auto put16 = [&](std::size_t off, std::int16_t v) { std::memcpy(h.data() + off, &v, 2); };
  auto putf = [&](std::size_t off, float v) { std::memcpy(h.data() + off, &v, 4); };
  put32(0, 348);
  put16(40, 3);
  put16(42, static_cast<std::int16_t>(d.fe));
  put16(44, static_cast<std::int16_t>(d.pe));
  put16(46, static_cast<std::int16_t>(d.sl));
  put16(70, datatype);
  put16(72, datatype == 16 ? 32 : 16);
  putf(76, 1.0f);  // qfac
  putf(80, 0.8f);
  putf(84, 0.8f);
  putf(88, 1.5f);
  putf(108, 352.0f);
  putf(112, slope);
  putf(116, inter);
  std::memcpy(h.data() + 344, "n+1\0", 4);
  std::ofstream out(path, std::ios::binary);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

}  // namespace

TEST(NiftiIo, Float32) {
  const Dims d{4, 3, 2};
  std::vector<float> vals(d.total());
  std::iota(vals.begin(), vals.end(), 1.0f);
  std::vector<char> bytes(vals.size() * 4);
  std::memcpy(bytes.data(), vals.data(), bytes.size());
  const auto path = scratch("f32.nii");
  write_nifti(path, d, 16, 0.0f, 0.0f, bytes);
  const auto v = mrb::load_volume(path);
  EXPECT_EQ(v.dims(), d);
  EXPECT_EQ(v(3, 2, 1), 24.0f);
  EXPECT_DOUBLE_EQ(v.spacing().sl, 1.5);
}

TEST(NiftiIo, Int16WithScaling) {
  const Dims d{2, 2, 2};
  std::vector<std::int16_t> raw{0, 1, 2, 3, 4, 5, 6, -1};
  std::vector<char> bytes(raw.size() * 2);
  std::memcpy(bytes.data(), raw.data(), bytes.size());
  const auto path = scratch("i16.nii");
  write_nifti(path, d, 4, 2.0f, 1.0f, bytes);
  const auto v = mrb::load_volume(path);
  EXPECT_EQ(v(1, 1, 1), -1.0f);
  EXPECT_EQ(v(0, 1, 0), 5.0f);
}

TEST(NiftiIo, BadMagicIsFormatError) {
  const auto path = scratch("bad.nii");
  write_nifti(path, {2, 2, 2}, 16, 0, 0, std::vector<char>(32));
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(344);
  f.write("ni1\0", 4);
  f.close();
  EXPECT_EQ(kind_of([&] { mrb::load_volume(path); }), ErrorKind::FormatError);
}

TEST(Phantom, Deterministic) {
  for (auto kind : {mrb::PhantomKind::Ellipsoid, mrb::PhantomKind::BandLimited, mrb::PhantomKind::UniformNoise}) {
    const auto a = mrb::make_phantom(kind, {16, 16, 16}, 42);
    const auto b = mrb::make_phantom(kind, {16, 16, 16}, 42);
    const auto c = mrb::make_phantom(kind, {16, 16, 16}, 43);
    EXPECT_EQ(mrb::checksum(a), mrb::checksum(b));
    EXPECT_NE(mrb::checksum(a), mrb::checksum(c));
  }
}

TEST(Phantom, EllipsoidRangeAndBackground) {
  const auto v = mrb::make_phantom(mrb::PhantomKind::Ellipsoid, {32, 32, 32}, 1);
  const auto [lo, hi] = v.minmax();
  EXPECT_GE(lo, 0.0f);
  EXPECT_LE(hi, 1.0f);
  EXPECT_EQ(v(0, 0, 0), 0.0f);
  EXPECT_EQ(v(31, 31, 31), 0.0f);
  EXPECT_EQ(v(0, 16, 16), 0.0f);
  EXPECT_GT(v(16, 16, 16), 0.0f);
}

TEST(Phantom, BandLimitedSpectrumSupport) {
  mrb::PhantomOptions opt;
  opt.cutoff = 4;
  const auto v = mrb::make_phantom(mrb::PhantomKind::BandLimited, {16, 16, 16}, 9, opt);
  const auto k = oracle::dft3_centered(v);
  double outside = 0.0, inside = 0.0;
  for (std::size_t s = 0; s < 16; ++s) {
    for (std::size_t p = 0; p < 16; ++p) {
      for (std::size_t f = 0; f < 16; ++f) {
        const long df = static_cast<long>(f) - 8, dp = static_cast<long>(p) - 8, ds = static_cast<long>(s) - 8;
        const double m = std::abs(k[f + 16 * (p + 16 * s)]);
        if (std::abs(df) >= 4 || std::abs(dp) >= 4 || std::abs(ds) >= 4) {
          outside = std::max(outside, m);
        } else {
          inside = std::max(inside, m);
        }
      }
    }
  }
  EXPECT_LT(outside, 1e-5);  // float32 storage noise
  EXPECT_GT(inside, 1.0);
}

TEST(Phantom, Errors) {
  EXPECT_EQ(kind_of([] { mrb::parse_phantom_kind("cube"); }), ErrorKind::UnsupportedKind);
  EXPECT_EQ(kind_of([] { mrb::make_phantom(mrb::PhantomKind::Ellipsoid, {8, 16, 16}, 0); }),
            ErrorKind::VolumeTooSmall);
}
