#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"
#include "volseg/volcore.hpp"

namespace volseg {
namespace {

using testing::Rng;

TEST(Geometry, RejectsZeroDimsAndNonPositiveSpacing) {
  EXPECT_THROW(Geometry({0, 2, 2}, {1, 1, 1}), InvalidArgument);
  EXPECT_THROW(Geometry({2, 2, 2}, {1, 0, 1}), InvalidArgument);
  EXPECT_THROW(Geometry({2, 2, 2}, {1, 1, -2}), InvalidArgument);
}

TEST(Geometry, AffineMustAgreeWithSpacing) {
  Affine a = diagonal_affine({1, 1, 1});
  a[0][0] = 2.0;
  EXPECT_THROW(Geometry({2, 2, 2}, {1, 1, 1}, a), InvalidArgument);
  EXPECT_NO_THROW(Geometry({2, 2, 2}, {2, 1, 1}, a));
}

TEST(Geometry, LinearIndexIsXFastest) {
  const Geometry g({3, 4, 5}, {1, 1, 1});
  EXPECT_EQ(g.linear(1, 0, 0), 1u);
  EXPECT_EQ(g.linear(0, 1, 0), 3u);
  EXPECT_EQ(g.linear(0, 0, 1), 12u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.coords(i);
    EXPECT_EQ(g.linear(c[0], c[1], c[2]), i);
  }
}

TEST(LabelMask, RejectsNonBinaryValuesAndWrongLength) {
  const Geometry g({2, 1, 1}, {1, 1, 1});
  EXPECT_THROW(LabelMask(g, {0, 2}), InvalidArgument);
  EXPECT_THROW(LabelMask(g, {0, 1, 1}), InvalidArgument);
}

TEST(SegmentationPair, MismatchedGeometryIsAnError) {
  const LabelMask a(Geometry({2, 2, 2}, {1, 1, 1}));
  const LabelMask b(Geometry({2, 2, 2}, {1, 1, 2}));
  const LabelMask c(Geometry({2, 2, 3}, {1, 1, 1}));
  EXPECT_THROW(SegmentationPair(a, b), GeometryMismatch);
  EXPECT_THROW(SegmentationPair(a, c), GeometryMismatch);
}

TEST(VoxelVolume, UnitConversion) {
  EXPECT_DOUBLE_EQ(voxel_volume_ml(Geometry({1, 1, 1}, {1, 1, 1})), 0.001);
  EXPECT_DOUBLE_EQ(voxel_volume_ml(Geometry({1, 1, 1}, {2, 2, 3})), 0.012);
  EXPECT_DOUBLE_EQ(voxel_volume_ml(Geometry({1, 1, 1}, {0.8, 0.8, 5})), 0.0032);
}

TEST(VoxelVolume, StrictlyMonotoneInEachSpacing) {
  Rng rng(5);
  std::uniform_real_distribution<double> s(0.1, 5.0);
  for (int t = 0; t < 100; ++t) {
    Spacing sp{s(rng), s(rng), s(rng)};
    const double base = voxel_volume_ml(Geometry({1, 1, 1}, sp));
    for (int a = 0; a < 3; ++a) {
      Spacing bigger = sp;
      bigger[a] *= 1.01;
      EXPECT_GT(voxel_volume_ml(Geometry({1, 1, 1}, bigger)), base);
    }
  }
}

TEST(MaskCount, Examples) {
  const Geometry g({2, 2, 2}, {1, 1, 1});
  EXPECT_EQ(mask_count(LabelMask(g)), 0u);
  EXPECT_EQ(mask_count(LabelMask(g, std::vector<std::uint8_t>(8, 1))), 8u);
  std::vector<std::uint8_t> checker(8);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto c = g.coords(i);
    checker[i] = (c[0] + c[1] + c[2]) % 2;
  }
  EXPECT_EQ(mask_count(LabelMask(g, checker)), 4u);
}

TEST(SurfaceVoxels, EmptyMaskThrows) {
  EXPECT_THROW(surface_voxels(LabelMask(Geometry({3, 3, 3}, {1, 1, 1}))), EmptyMask);
}

TEST(SurfaceVoxels, SingleVoxel) {
  const Geometry g({5, 5, 5}, {1, 1, 1});
  const auto m = testing::box_mask(g, {2, 2, 2}, {1, 1, 1});
  EXPECT_EQ(surface_voxels(m), std::vector<std::size_t>{g.linear(2, 2, 2)});
}

TEST(SurfaceVoxels, SolidCubeExcludesCentre) {
  const Geometry g({5, 5, 5}, {1, 1, 1});
  const auto s = surface_voxels(testing::box_mask(g, {1, 1, 1}, {3, 3, 3}));
  EXPECT_EQ(s.size(), 26u);
  EXPECT_EQ(std::count(s.begin(), s.end(), g.linear(2, 2, 2)), 0);
}

TEST(SurfaceVoxels, RodIsAllSurface) {
  const Geometry g({3, 3, 7}, {1, 1, 1});
  EXPECT_EQ(surface_voxels(testing::box_mask(g, {1, 1, 1}, {1, 1, 5})).size(), 5u);
}

TEST(SurfaceVoxels, GridBoundaryCountsAsBackground) {
  const Geometry g({3, 3, 3}, {1, 1, 1});
  const LabelMask full(g, std::vector<std::uint8_t>(27, 1));
  EXPECT_EQ(surface_voxels(full).size(), 26u);
}

TEST(SurfaceVoxels, BoxClosedForm) {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> side(3, 7);
  for (int t = 0; t < 50; ++t) {
    const std::size_t a = side(rng), b = side(rng), c = side(rng);
    const Geometry g({a + 2, b + 3, c + 1}, {1, 1, 1});
    const auto s = surface_voxels(testing::box_mask(g, {1, 2, 0}, {a, b, c}));
    EXPECT_EQ(s.size(), a * b * c - (a - 2) * (b - 2) * (c - 2));
  }
}

TEST(SurfaceVoxels, SubsetOfForegroundAndMatchesOracle) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Geometry g(testing::random_dims(rng, 9), {1, 1, 1});
    const auto m = testing::random_mask(rng, g, 0.6);
    if (mask_count(m) == 0) continue;
    const auto s = surface_voxels(m);
    for (auto i : s) EXPECT_TRUE(m[i]);
    std::set<std::size_t> expected;
    for (const auto& p : testing::oracle_surface(m)) {
      expected.insert(g.linear(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]),
                               static_cast<std::size_t>(p[2])));
    }
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()), expected);
  }
}

}  // namespace
}  // namespace volseg
