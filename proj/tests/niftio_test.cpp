#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "volseg/niftio.hpp"

namespace volseg::nifti {
namespace {

using testing::Rng;

std::vector<double> values(const VoxelGrid& g) { return {g.data().begin(), g.data().end()}; }

TEST(NiftiFixture, HandBuiltFileDecodes) {
  const auto bytes = testing::fixture_2x2x2();
  ASSERT_EQ(bytes.size(), 352u + 32u);
  const Image img = read_nifti(bytes);
  EXPECT_EQ(img.grid.dims(), (Dims{2, 2, 2}));
  EXPECT_EQ(img.grid.geometry().spacing(), (Spacing{1, 1, 1}));
  EXPECT_EQ(values(img.grid), (std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(img.affine_source, AffineSource::kPixdim);
  EXPECT_EQ(img.byte_order, ByteOrder::kLittle);
}

TEST(NiftiFixture, BigEndianTwinDecodesIdentically) {
  const Image le = read_nifti(testing::fixture_2x2x2(false));
  const Image be = read_nifti(testing::fixture_2x2x2(true));
  EXPECT_EQ(be.byte_order, ByteOrder::kBig);
  EXPECT_EQ(values(le.grid), values(be.grid));
  EXPECT_EQ(le.grid.geometry().spacing(), be.grid.geometry().spacing());
  EXPECT_EQ(le.grid.geometry().affine(), be.grid.geometry().affine());
}

TEST(NiftiFixture, CorruptMagicIsBadMagic) {
  EXPECT_THROW(read_nifti(testing::fixture_2x2x2(false, "x+1")), BadMagic);
}

TEST(NiftiFixture, PairMagicNeedsSeparateImage) {
  EXPECT_THROW(read_nifti(testing::fixture_2x2x2(false, "ni1")), BadMagic);
}

TEST(NiftiFixture, ScalingApplied) {
  const Image img = read_nifti(testing::fixture_2x2x2(false, "n+1", 2.f, 1.f));
  EXPECT_EQ(img.grid[3], 7.0);
  EXPECT_EQ(img.grid[0], 1.0);
}

TEST(NiftiFixture, ZeroSlopeMeansUnscaled) {
  const Image img = read_nifti(testing::fixture_2x2x2(false, "n+1", 0.f, 5.f));
  EXPECT_EQ(img.grid[3], 3.0);
}

TEST(NiftiFixture, TruncatedPayload) {
  auto bytes = testing::fixture_2x2x2();
  bytes.pop_back();
  EXPECT_THROW(read_nifti(bytes), TruncatedData);
  bytes.resize(100);
  EXPECT_THROW(read_nifti(bytes), TruncatedData);
}

TEST(NiftiFixture, BadSizeofHdr) {
  auto bytes = testing::fixture_2x2x2();
  bytes[0] = 0x01;
  EXPECT_THROW(read_nifti(bytes), BadHeader);
}

TEST(NiftiFixture, UnsupportedDatatype) {
  testing::RawNifti f(0, false);
  f.bytes = testing::fixture_2x2x2();
  f.put<std::int16_t>(70, 32);  // complex64
  EXPECT_THROW(read_nifti(f.bytes), UnsupportedDatatype);
}

TEST(NiftiFixture, SingletonFourthAxisIsSqueezed) {
  testing::RawNifti f(0, false);
  f.bytes = testing::fixture_2x2x2();
  f.put<std::int16_t>(40, 4);
  EXPECT_EQ(read_nifti(f.bytes).grid.dims(), (Dims{2, 2, 2}));
  f.put<std::int16_t>(48, 2);
  EXPECT_THROW(read_nifti(f.bytes), BadHeader);
}

TEST(NiftiFixture, GzipDetected) {
  const auto raw = testing::fixture_2x2x2(true);
  const auto gz = gzip(raw);
  ASSERT_TRUE(is_gzip(gz));
  EXPECT_EQ(values(read_nifti(gz).grid), values(read_nifti(raw).grid));
}

TEST(NiftiFixture, TruncatedGzip) {
  auto gz = gzip(testing::fixture_2x2x2());
  gz.resize(gz.size() / 2);
  EXPECT_THROW(read_nifti(gz), Error);
}

TEST(NiftiHeader, EncodeDecodeRoundTripBothOrders) {
  Header h = make_header(Geometry({3, 4, 5}, {0.5, 0.75, 2.0}), Datatype::kInt16);
  h.qform_code = 2;
  h.quatern_b = 0.25f;
  h.qoffset_z = -3.5f;
  std::memcpy(h.descrip.data(), "hello", 5);
  for (ByteOrder order : {ByteOrder::kLittle, ByteOrder::kBig}) {
    const auto bytes = encode_header(h, order);
    ByteOrder detected;
    const Header back = decode_header(bytes, &detected);
    EXPECT_EQ(detected, order);
    EXPECT_EQ(back.dim, h.dim);
    EXPECT_EQ(back.pixdim, h.pixdim);
    EXPECT_EQ(back.srow_x, h.srow_x);
    EXPECT_EQ(back.quatern_b, h.quatern_b);
    EXPECT_EQ(back.qoffset_z, h.qoffset_z);
    EXPECT_EQ(back.descrip, h.descrip);
    EXPECT_EQ(back.magic, h.magic);
  }
}

TEST(NiftiHeader, FieldOffsetsMatchStandard) {
  Header h = make_header(Geometry({7, 1, 1}, {1, 1, 1}), Datatype::kFloat64);
  h.sform_code = 3;
  const auto b = encode_header(h);
  auto i16 = [&](std::size_t off) { return static_cast<std::int16_t>(b[off] | (b[off + 1] << 8)); };
  float f;
  EXPECT_EQ(i16(40), 3);
  EXPECT_EQ(i16(42), 7);
  EXPECT_EQ(i16(70), 64);
  EXPECT_EQ(i16(72), 64);
  EXPECT_EQ(i16(254), 3);
  std::memcpy(&f, b.data() + 108, 4);
  EXPECT_EQ(f, 352.f);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(b.data() + 344)), "n+1");
}

TEST(NiftiAffine, SformBeatsQformBeatsPixdim) {
  const Geometry g({2, 2, 2}, {2, 3, 4});
  auto bytes = write_nifti(VoxelGrid(g, std::vector<double>(8, 1.0)));
  Header h = decode_header(bytes);
  h.qform_code = 1;
  h.qoffset_x = 10;
  h.srow_x[3] = 20;
  auto with = [&](const Header& hh) {
    auto out = bytes;
    const auto enc = encode_header(hh);
    std::copy(enc.begin(), enc.end(), out.begin());
    return read_nifti(out);
  };
  Image img = with(h);
  EXPECT_EQ(img.affine_source, AffineSource::kSform);
  EXPECT_EQ(img.grid.geometry().affine()[0][3], 20.0);
  h.sform_code = 0;
  img = with(h);
  EXPECT_EQ(img.affine_source, AffineSource::kQform);
  EXPECT_EQ(img.grid.geometry().affine()[0][3], 10.0);
  EXPECT_EQ(img.grid.geometry().spacing(), (Spacing{2, 3, 4}));
  h.qform_code = 0;
  img = with(h);
  EXPECT_EQ(img.affine_source, AffineSource::kPixdim);
  EXPECT_EQ(img.grid.geometry().affine(), diagonal_affine({2, 3, 4}));
}

TEST(NiftiAffine, QformRotationPreservesColumnNorms) {
  Header h = make_header(Geometry({2, 2, 2}, {1.5, 2.5, 3.5}), Datatype::kUint8);
  h.sform_code = 0;
  h.qform_code = 1;
  // 90 degrees about z: (a, b, c, d) = (cos 45, 0, 0, sin 45).
  h.quatern_d = static_cast<float>(std::sin(std::numbers::pi / 4));
  const Affine a = qform_affine(h);
  const Spacing n = affine_column_norms(a);
  EXPECT_NEAR(n[0], 1.5, 1e-6);
  EXPECT_NEAR(n[1], 2.5, 1e-6);
  EXPECT_NEAR(n[2], 3.5, 1e-6);
  EXPECT_NEAR(a[1][0], 1.5, 1e-6);  // x axis maps to +y
}

TEST(NiftiWrite, MaskFileSizeAndCompression) {
  const Geometry g({2, 2, 2}, {1, 1, 1});
  const LabelMask m(g, {1, 0, 1, 0, 0, 1, 1, 0});
  const auto raw = write_mask(m, false);
  EXPECT_EQ(raw.size(), 352u + 8u);
  const auto gz = write_mask(m, true);
  ASSERT_GE(gz.size(), 2u);
  EXPECT_EQ(gz[0], 0x1f);
  EXPECT_EQ(gz[1], 0x8b);
  EXPECT_EQ(LabelMask::from_grid(read_nifti(gz).grid), m);
}

TEST(NiftiWrite, FixtureRoundTrip) {
  const Image img = read_nifti(testing::fixture_2x2x2());
  const Image back = read_nifti(write_nifti(img.grid));
  EXPECT_EQ(values(back.grid), values(img.grid));
  EXPECT_EQ(back.header.sform_code, 1);
  EXPECT_TRUE(back.header.single_file());
}

TEST(NiftiWrite, IntegerValuesAreRoundedAndClamped) {
  const Geometry g({4, 1, 1}, {1, 1, 1});
  const auto back = read_nifti(write_nifti(VoxelGrid(g, {-3.0, 2.6, 300.0, 70000.0}), {Datatype::kUint8}));
  EXPECT_EQ(values(back.grid), (std::vector<double>{0, 3, 255, 255}));
}

Affine random_rotation_affine(Rng& rng, const Spacing& s) {
  // Offsets are stored as float32 in srow, so draw them from float32 values.
  std::uniform_real_distribution<double> angle(-3.14, 3.14);
  std::uniform_real_distribution<float> off(-50.f, 50.f);
  const double t = angle(rng);
  const double c = std::cos(t), sn = std::sin(t);
  Affine a{};
  a[0] = {c * s[0], -sn * s[1], 0, off(rng)};
  a[1] = {sn * s[0], c * s[1], 0, off(rng)};
  a[2] = {0, 0, s[2], off(rng)};
  a[3] = {0, 0, 0, 1};
  return a;
}

class NiftiRoundTrip : public ::testing::TestWithParam<Datatype> {};

TEST_P(NiftiRoundTrip, RandomGrids) {
  const Datatype type = GetParam();
  Rng rng(100 + static_cast<int>(type));
  std::uniform_real_distribution<float> sp(0.3f, 4.0f);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims d = testing::random_dims(rng, 9);
    const Spacing s{sp(rng), sp(rng), sp(rng)};  // float32-representable, as pixdim stores them
    const Geometry g(d, s, random_rotation_affine(rng, s));
    std::vector<double> v(g.size());
    for (auto& x : v) {
      switch (type) {
        case Datatype::kUint8: x = static_cast<double>(rng() % 256); break;
        case Datatype::kInt16: x = static_cast<double>(static_cast<std::int16_t>(rng())); break;
        case Datatype::kInt32: x = static_cast<double>(static_cast<std::int32_t>(rng())); break;
        default: x = std::ldexp(static_cast<double>(static_cast<std::int64_t>(rng() >> 11)) - 4.5e15, -40); break;
      }
    }
    const VoxelGrid grid(g, v);
    const WriteOptions opts{type, trial % 2 == 0, trial % 3 == 0 ? ByteOrder::kBig : ByteOrder::kLittle};
    const Image back = read_nifti(write_nifti(grid, opts));
    ASSERT_EQ(back.grid.dims(), d);
    EXPECT_EQ(back.grid.geometry().spacing(), s);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(back.grid.geometry().affine()[r][c], g.affine()[r][c], 1e-6);
    const auto out = back.grid.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (type == Datatype::kFloat32) {
        EXPECT_LE(testing::ulp_distance(static_cast<float>(out[i]), static_cast<float>(v[i])), 1);
      } else {
        ASSERT_EQ(out[i], v[i]);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllDatatypes, NiftiRoundTrip,
                         ::testing::Values(Datatype::kUint8, Datatype::kInt16, Datatype::kInt32, Datatype::kFloat32,
                                           Datatype::kFloat64),
                         [](const auto& info) { return "code" + std::to_string(static_cast<int>(info.param)); });

TEST(NiftiFiles, GzPathIsCompressedAndPairFilesRead) {
  const auto dir = testing::temp_dir("niftio");
  const Image img = read_nifti(testing::fixture_2x2x2());
  write_nifti_file(dir / "a.nii.gz", img.grid);
  EXPECT_TRUE(is_gzip(read_file_bytes(dir / "a.nii.gz")));
  EXPECT_EQ(values(read_nifti_file(dir / "a.nii.gz").grid), values(img.grid));

  // Header/image pair: "ni1" header with vox_offset 0 and a separate payload.
  Header h = make_header(img.grid.geometry(), Datatype::kFloat32);
  std::memcpy(h.magic.data(), "ni1\0", 4);
  h.vox_offset = 0;
  const auto hdr = encode_header(h);
  const auto full = testing::fixture_2x2x2();
  write_file_bytes(dir / "p.hdr", hdr);
  write_file_bytes(dir / "p.img", std::vector<std::uint8_t>(full.begin() + 352, full.end()));
  EXPECT_EQ(values(read_nifti_file(dir / "p.hdr").grid), values(img.grid));
  EXPECT_THROW(read_nifti_file(dir / "missing.nii"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace volseg::nifti
