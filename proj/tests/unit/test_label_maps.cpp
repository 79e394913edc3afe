#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "labelsynth/label_maps.hpp"
#include "support/oracles.hpp"

using namespace labelsynth;
using testing_support::brute_force_boundary;

TEST(BoundaryMap, ConstantMapHasNoBoundary) {
  const BoundaryMap b = compute_boundary_map(InstanceMap(8, 8, 7));
  EXPECT_TRUE(std::all_of(b.grid.begin(), b.grid.end(), [](uint8_t v) { return v == 0; }));
}

TEST(BoundaryMap, TwoByTwoSplitMarksEveryPixel) {
  InstanceMap m(2, 2);
  m.grid = {1, 1, 2, 2};
  const BoundaryMap b = compute_boundary_map(m);
  EXPECT_EQ(b.grid, (std::vector<uint8_t>{1, 1, 1, 1}));
}

TEST(BoundaryMap, MatchesBruteForceOnRandomMaps) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = std::uniform_int_distribution<int>(1, 32)(rng);
    const int w = std::uniform_int_distribution<int>(1, 32)(rng);
    const int ids = std::uniform_int_distribution<int>(1, 5)(rng);
    std::uniform_int_distribution<int> id(0, ids - 1);
    InstanceMap m(h, w);
    std::vector<std::vector<int>> ref(h, std::vector<int>(w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) ref[y][x] = m.at(y, x) = id(rng);
    const auto expected = brute_force_boundary(ref);
    const BoundaryMap b = compute_boundary_map(m);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) ASSERT_EQ(b.at(y, x), expected[y][x]) << "trial " << trial << " at " << y << "," << x;
  }
}

TEST(BoundaryMap, MarkingIsSymmetricAcrossNeighbors) {
  auto [label, inst] = testing_support::random_scene(24, 24, 4, 5, 9);
  const BoundaryMap b = compute_boundary_map(inst);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x + 1 < 24; ++x)
      if (inst.at(y, x) != inst.at(y, x + 1)) {
        EXPECT_EQ(b.at(y, x), 1);
        EXPECT_EQ(b.at(y, x + 1), 1);
      }
}

TEST(OneHot, SinglePixel) {
  LabelMap m(1, 1, 3);
  const Tensor<float> t = encode_one_hot(m);
  ASSERT_EQ(t.c(), 3);
  EXPECT_EQ(t[0], 1.0f);
  EXPECT_EQ(t[1], 0.0f);
  EXPECT_EQ(t[2], 0.0f);
}

TEST(OneHot, PartitionAndArgmaxRoundTrip) {
  std::mt19937_64 rng(5);
  LabelMap m(16, 16, 8);
  for (auto& v : m.grid) v = std::uniform_int_distribution<int>(0, 7)(rng);
  const Tensor<float> t = encode_one_hot(m);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      float sum = 0;
      int arg = 0;
      for (int c = 0; c < 8; ++c) {
        sum += t(0, y, x, c);
        if (t(0, y, x, c) > t(0, y, x, arg)) arg = c;
      }
      EXPECT_EQ(sum, 1.0f);
      EXPECT_EQ(arg, m.at(y, x));
    }
}

TEST(OneHot, RejectsOutOfRangeClass) {
  LabelMap m(2, 2, 3);
  m.at(1, 1) = 3;
  EXPECT_THROW(encode_one_hot(m), InvalidLabelError);
}

TEST(Conditioning, PlaneCounts) {
  auto [label, inst] = testing_support::random_scene(16, 16, 4, 3, 1);
  EXPECT_EQ(build_conditioning(label, inst).plane_count(), 5);
  StyleVectors f;
  const RegionIndex r = RegionIndex::build(label, inst);
  for (const auto& k : r.keys) f[k] = {0.1f * static_cast<float>(k.class_id), 0.2f, static_cast<float>(k.instance_id)};
  EXPECT_EQ(build_conditioning(label, inst, &f).plane_count(), 4 + 1 + 3);
}

TEST(Conditioning, FeaturePlanesEqualPerRegionMaskFill) {
  auto [label, inst] = testing_support::random_scene(20, 28, 4, 6, 3);
  const RegionIndex r = RegionIndex::build(label, inst);
  StyleVectors f;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1, 1);
  for (const auto& k : r.keys) f[k] = {u(rng), u(rng), u(rng)};
  const ConditioningTensor c = build_conditioning(label, inst, &f);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 28; ++x) {
      const StyleVector& v = f.at({label.at(y, x), inst.at(y, x)});
      for (int k = 0; k < 3; ++k) EXPECT_EQ(c.planes(0, y, x, 5 + k), v[static_cast<std::size_t>(k)]);
    }
}

TEST(Conditioning, MissingStyleIsIncomplete) {
  auto [label, inst] = testing_support::random_scene(16, 16, 4, 3, 2);
  StyleVectors f;
  EXPECT_THROW(build_conditioning(label, inst, &f), IncompleteStyleError);
}

TEST(Conditioning, BoundaryPlaneMatchesBoundaryMap) {
  auto [label, inst] = testing_support::random_scene(16, 24, 4, 4, 8);
  const ConditioningTensor c = build_conditioning(label, inst);
  const BoundaryMap b = compute_boundary_map(inst);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 24; ++x) EXPECT_EQ(c.planes(0, y, x, 4), static_cast<float>(b.at(y, x)));
}

TEST(Conditioning, RejectsInstanceSpanningClasses) {
  LabelMap label(2, 2, 3);
  label.grid = {0, 1, 2, 2};
  InstanceMap inst(2, 2);
  inst.grid = {1, 1, 0, 0};
  EXPECT_THROW(build_conditioning(label, inst), Error);
}

TEST(Pyramid, LevelDims) {
  const auto p = build_pyramid(Tensor<float>(1, 128, 256, 3));
  ASSERT_EQ(p.levels.size(), 3u);
  EXPECT_EQ(p.levels[1].h(), 64);
  EXPECT_EQ(p.levels[1].w(), 128);
  EXPECT_EQ(p.levels[2].h(), 32);
  EXPECT_EQ(p.levels[2].w(), 64);
}

TEST(Pyramid, ConstantStaysConstant) {
  const auto p = build_pyramid(Tensor<float>(1, 16, 16, 3, 0.37f));
  for (const auto& l : p.levels)
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_EQ(l[i], 0.37f);
}

TEST(Pyramid, BlockMeanAndGlobalMean) {
  const Tensor<float> img = testing_support::random_image(1, 32, 48, 3, 4);
  const auto p = build_pyramid(img);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) {
        const double mean = (static_cast<double>(img(0, 2 * y, 2 * x, c)) + img(0, 2 * y + 1, 2 * x, c) +
                             img(0, 2 * y, 2 * x + 1, c) + img(0, 2 * y + 1, 2 * x + 1, c)) /
                            4.0;
        EXPECT_NEAR(p.levels[1](0, y, x, c), mean, 1e-6);
      }
  auto mean_of = [](const Tensor<float>& t) {
    return std::accumulate(t.span().begin(), t.span().end(), 0.0) / static_cast<double>(t.size());
  };
  for (const auto& l : p.levels) EXPECT_NEAR(mean_of(l), mean_of(img), 1e-5);
}

TEST(Pyramid, IndivisibleDimsRejected) {
  EXPECT_THROW(build_pyramid(Tensor<float>(1, 30, 32, 3)), ShapeError);
}

TEST(Downsample, NearestKeepsTopLeftPixel) {
  LabelMap m(4, 4, 4);
  for (int i = 0; i < 16; ++i) m.grid[static_cast<std::size_t>(i)] = i % 4;
  const LabelMap d = downsample_nearest(m);
  ASSERT_EQ(d.height, 2);
  EXPECT_EQ(d.at(0, 1), m.at(0, 2));
  EXPECT_EQ(d.at(1, 1), m.at(2, 2));
}
