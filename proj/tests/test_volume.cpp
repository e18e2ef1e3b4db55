#include "doctest.h"

#include "helpers.hpp"
#include "icnr/bytes.hpp"
#include "icnr/error.hpp"
#include "icnr/synth.hpp"
#include "icnr/volume.hpp"

using namespace icnr;
using testutil::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("rawbin hand-written file reads back x-fastest") {
  TempDir dir("vol_hand");
  ByteWriter w;
  w.str("VOL4");
  w.u8(1);
  w.u8(0);  // float32
  w.u16(0);
  for (std::uint32_t d : {2u, 2u, 2u, 3u}) w.u32(d);
  w.u64(0);
  for (int i = 0; i < 24; ++i) w.f32(float(i));
  write_file(dir / "a.bin", w.buffer());
  const Volume4D v = load_volume(dir / "a.bin", VolumeFormat::RawBin);
  CHECK(v.dims() == Dims4{2, 2, 2, 3});
  CHECK(v.at(0, 0, 0, 0) == 0.0f);
  CHECK(v.at(0, 0, 0, 1) == 8.0f);
  CHECK(v.at(0, 0, 0, 2) == 16.0f);
  CHECK(v.at(1, 0, 0, 0) == 1.0f);
  CHECK(v.at(0, 1, 0, 0) == 2.0f);
  CHECK(v.voxel_scale.offset == 0.0);
  CHECK(v.voxel_scale.gain == 1.0);
}

TEST_CASE("rawbin save/load is bit-identical") {
  TempDir dir("vol_rt");
  const Volume4D v = testutil::random_volume({3, 4, 2, 5}, 7);
  save_rawbin(v, dir / "v.bin");
  const auto first = read_file(dir / "v.bin");
  const Volume4D back = load_volume(dir / "v.bin");
  REQUIRE(back.dims() == v.dims());
  for (std::size_t i = 0; i < v.dims().count(); ++i) CHECK(std::bit_cast<std::uint32_t>(back.data()[i]) == std::bit_cast<std::uint32_t>(v.data()[i]));
  save_rawbin(back, dir / "w.bin");
  CHECK(read_file(dir / "w.bin") == first);
}

TEST_CASE("rawbin int16 rounds and saturates") {
  TempDir dir("vol_i16");
  Volume4D v(Dims4{4, 1, 1, 1}, {1.4f, -2.6f, 40000.0f, -40000.0f});
  save_rawbin(v, dir / "v.bin", DType::Int16);
  const Volume4D b = load_volume(dir / "v.bin");
  CHECK(b.source_dtype == DType::Int16);
  CHECK(b.data()[0] == 1.0f);
  CHECK(b.data()[1] == -3.0f);
  CHECK(b.data()[2] == 32767.0f);
  CHECK(b.data()[3] == -32768.0f);
}

TEST_CASE("rawbin corrupt inputs") {
  TempDir dir("vol_bad");
  const Volume4D v = testutil::random_volume({2, 2, 1, 2}, 1);
  save_rawbin(v, dir / "v.bin");
  auto bytes = read_file(dir / "v.bin");
  auto truncated = bytes;
  truncated.pop_back();
  write_file(dir / "t.bin", truncated);
  CHECK(kind_of([&] { load_volume(dir / "t.bin", VolumeFormat::RawBin); }) == ErrorKind::CorruptHeader);
  auto magic = bytes;
  magic[0] = 'X';
  write_file(dir / "m.bin", magic);
  CHECK(kind_of([&] { load_volume(dir / "m.bin", VolumeFormat::RawBin); }) == ErrorKind::CorruptHeader);
  auto dtype = bytes;
  dtype[5] = 9;
  write_file(dir / "d.bin", dtype);
  CHECK(kind_of([&] { load_volume(dir / "d.bin", VolumeFormat::RawBin); }) == ErrorKind::UnsupportedDatatype);
}

TEST_CASE("nifti int16 with scaling, reference writer") {
  TempDir dir("nii");
  testutil::NiftiSpec s;
  s.slope = 2.0f;
  s.inter = 1.0f;
  testutil::write_nifti(dir / "one.nii", s, {5});
  const Volume4D v = load_volume(dir / "one.nii");
  CHECK(v.data()[0] == 11.0f);
  CHECK(v.voxel_scale.gain == 2.0);
  CHECK(v.voxel_scale.offset == 1.0);
  CHECK(v.source_dtype == DType::Int16);
}

TEST_CASE("nifti endianness and datatypes agree") {
  TempDir dir("nii_dt");
  std::vector<double> vals;
  for (int i = 0; i < 2 * 3 * 2 * 4; ++i) vals.push_back(i * 1.5 - 7);
  for (std::int16_t dt : {std::int16_t(16), std::int16_t(64)}) {
    for (bool big : {false, true}) {
      testutil::NiftiSpec s;
      s.dims[0] = 2, s.dims[1] = 3, s.dims[2] = 2, s.dims[3] = 4;
      s.datatype = dt;
      s.big_endian = big;
      const auto p = dir / ("v" + std::to_string(dt) + (big ? "b" : "l") + ".nii");
      testutil::write_nifti(p, s, vals);
      const Volume4D v = load_volume(p);
      REQUIRE(v.dims() == Dims4{2, 3, 2, 4});
      for (std::size_t i = 0; i < vals.size(); ++i) CHECK(v.data()[i] == doctest::Approx(vals[i]));
      CHECK(v.at(1, 2, 1, 3) == doctest::Approx(vals.back()));
    }
  }
}

TEST_CASE("nifti guards") {
  TempDir dir("nii_bad");
  testutil::NiftiSpec s;
  s.ndim = 3;
  testutil::write_nifti(dir / "d3.nii", s, {1});
  CHECK(kind_of([&] { load_volume(dir / "d3.nii"); }) == ErrorKind::DimensionMismatch);
  testutil::NiftiSpec u;
  u.datatype = 2;  // uint8
  testutil::write_nifti(dir / "u8.nii", u, {});
  CHECK(kind_of([&] { load_volume(dir / "u8.nii"); }) == ErrorKind::UnsupportedDatatype);
  testutil::NiftiSpec m;
  m.magic = "abc";
  testutil::write_nifti(dir / "mg.nii", m, {1});
  CHECK(kind_of([&] { load_volume(dir / "mg.nii"); }) == ErrorKind::CorruptHeader);
  testutil::NiftiSpec t;
  t.dims[3] = 10;
  testutil::write_nifti(dir / "short.nii", t, {1, 2});
  CHECK(kind_of([&] { load_volume(dir / "short.nii"); }) == ErrorKind::CorruptHeader);
}

TEST_CASE("split_mean") {
  SUBCASE("constant volume") {
    Volume4D v(Dims4{2, 2, 1, 3}, std::vector<float>(12, 4.5f));
    const MeanSplit s = split_mean(v);
    for (float m : s.mean.data) CHECK(m == 4.5f);
    for (float r : s.residual.data()) CHECK(r == 0.0f);
  }
  SUBCASE("two-sample series") {
    Volume4D v(Dims4{1, 1, 1, 2}, {1.0f, 3.0f});
    const MeanSplit s = split_mean(v);
    CHECK(s.mean.data[0] == 2.0f);
    CHECK(s.residual.data()[0] == -1.0f);
    CHECK(s.residual.data()[1] == 1.0f);
  }
  SUBCASE("recombination") {
    const Volume4D v = testutil::random_volume({4, 4, 2, 8}, 3, 10.0);
    const MeanSplit s = split_mean(v);
    const Volume4D back = add_mean(s.residual, s.mean);
    double worst = 0;
    for (std::size_t i = 0; i < v.dims().count(); ++i)
      worst = std::max(worst, double(std::abs(back.data()[i] - v.data()[i])));
    CHECK(worst < 1e-5 * 10);
  }
}

TEST_CASE("apply_mask order and guards") {
  std::vector<float> data(2 * 2 * 1 * 3);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i);
  const Volume4D v(Dims4{2, 2, 1, 3}, data);
  const VoxelSeriesSet all = apply_mask(v, Mask3D::full({2, 2, 1}));
  REQUIRE(all.coords.size() == 4);
  // lexicographic (x, y, z): (0,0) (0,1) (1,0) (1,1)
  CHECK(all.coords[0] == Coord{0, 0, 0});
  CHECK(all.coords[1] == Coord{0, 1, 0});
  CHECK(all.coords[2] == Coord{1, 0, 0});
  CHECK(all.coords[3] == Coord{1, 1, 0});
  for (std::size_t i = 0; i < 4; ++i)
    for (int t = 0; t < 3; ++t) {
      const auto& c = all.coords[i];
      CHECK(all.series(Eigen::Index(i), t) == v.at(c[0], c[1], c[2], t));
    }

  Mask3D one(Dims3{2, 2, 1}, {0, 0, 1, 0});
  const VoxelSeriesSet s = apply_mask(v, one);
  REQUIRE(s.coords.size() == 1);
  CHECK(s.coords[0] == Coord{0, 1, 0});
  CHECK(s.series(0, 2) == v.at(0, 1, 0, 2));

  Mask3D none(Dims3{2, 2, 1}, {0, 0, 0, 0});
  CHECK(kind_of([&] { apply_mask(v, none); }) == ErrorKind::EmptyMask);
  Mask3D wrong = Mask3D::full({3, 2, 1});
  CHECK_THROWS_AS(apply_mask(v, wrong), Error);
}

TEST_CASE("threshold mask row count matches positive-mean voxels") {
  const Volume4D v = testutil::random_volume({5, 4, 3, 6}, 11);
  const MeanFrame m = temporal_mean(v);
  std::vector<std::uint8_t> bits(m.data.size());
  std::size_t positive = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) positive += (bits[i] = m.data[i] > 0);
  const VoxelSeriesSet s = apply_mask(v, Mask3D(m.dims, bits));
  CHECK(s.coords.size() == positive);
}

TEST_CASE("auto_mask") {
  SUBCASE("half bright") {
    std::vector<float> d(4 * 2, 0.0f);
    for (int t = 0; t < 2; ++t) d[std::size_t(t * 4)] = d[std::size_t(t * 4 + 1)] = 100.0f;
    const Mask3D m = auto_mask(Volume4D(Dims4{2, 2, 1, 2}, d), 0.1);
    CHECK(m.count() == 2);
    CHECK(m.at(0, 0, 0));
    CHECK(m.at(1, 0, 0));
    CHECK(!m.at(0, 1, 0));
  }
  SUBCASE("all equal") {
    const Mask3D m = auto_mask(Volume4D(Dims4{3, 2, 1, 2}, std::vector<float>(12, 7.0f)), 0.5);
    CHECK(m.count() == 6);
  }
  SUBCASE("empty") {
    CHECK(kind_of([&] { auto_mask(Volume4D(Dims4{2, 1, 1, 2}, std::vector<float>(4, 0.0f)), 0.1); }) ==
          ErrorKind::EmptyMask);
  }
  SUBCASE("phantom blobs") {
    const Dims4 dims{16, 16, 8, 64};
    const StimulusSpec stim = make_event_design(4, 64, 3, 2, 2);
    SynthResult r = generate(dims, stim, HrfParams{}, 4, kNoiseless, 2, SynthOptions{0.625});
    // A positive baseline inside the blobs stands in for anatomy.
    Volume4D vol = r.truth.clean;
    std::size_t blob = 0;
    for (int z = 0; z < dims.d; ++z)
      for (int y = 0; y < dims.h; ++y)
        for (int x = 0; x < dims.w; ++x) {
          const bool in = r.truth.region_labels.at(x, y, z) >= 0;
          blob += in;
          for (int t = 0; t < dims.t; ++t) vol.at(x, y, z, t) += in ? 100.0f : 0.0f;
        }
    const double n = double(auto_mask(vol, 0.1).count());
    CHECK(std::abs(n - double(blob)) <= 0.02 * double(blob));
  }
}
