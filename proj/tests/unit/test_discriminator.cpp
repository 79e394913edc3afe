#include <gtest/gtest.h>

#include "labelsynth/arch.hpp"
#include "labelsynth/discriminator.hpp"
#include "labelsynth/label_maps.hpp"
#include "support/oracles.hpp"

using namespace labelsynth;
using testing_support::random_image;

namespace {

MultiScaleDiscriminator<float> small_d(std::uint64_t seed) {
  MultiScaleDiscriminator<float> d(DiscriminatorSpec{.width_divisor = 16, .cond_planes = 5});
  std::mt19937_64 rng(seed);
  auto p = d.parameters();
  nn::init_normal<float>(p, rng, 0.02);
  return d;
}

}  // namespace

TEST(Discriminator, ScoreMapShapeFollowsShapeInference) {
  auto d = small_d(1);
  const auto out = d.forward(0, random_image(1, 128, 256, 5, 2, 0, 1), random_image(1, 128, 256, 3, 3));
  const auto shapes = infer_shapes(d.graph(), 128, 256, 8);
  EXPECT_EQ(out.score_map.h(), shapes.back().height);
  EXPECT_EQ(out.score_map.w(), shapes.back().width);
  EXPECT_EQ(out.score_map.c(), 1);
  ASSERT_EQ(out.features.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out.features[i].h(), shapes[i].height);
    EXPECT_EQ(out.features[i].c(), shapes[i].planes);
  }
}

TEST(Discriminator, RepeatedInputGivesIdenticalFeatures) {
  auto d = small_d(4);
  const auto cond = random_image(1, 64, 64, 5, 5), img = random_image(1, 64, 64, 3, 6);
  const auto a = d.forward(1, cond, img), b = d.forward(1, cond, img);
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i)
    for (std::size_t j = 0; j < a.features[i].size(); ++j) ASSERT_EQ(a.features[i][j], b.features[i][j]);
}

TEST(Discriminator, MultiscaleOutputsAndTapCounts) {
  auto d = small_d(7);
  const auto cond = build_pyramid(random_image(1, 64, 128, 5, 8, 0, 1));
  const auto real = build_pyramid(random_image(1, 64, 128, 3, 9));
  const auto fake = build_pyramid(random_image(1, 64, 128, 3, 10));
  const auto r = d.multiscale_forward(cond.levels, real.levels);
  const auto f = d.multiscale_forward(cond.levels, fake.levels);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(d.tap_count(), 5);
  for (int k = 0; k < 3; ++k) {
    ASSERT_EQ(r[k].features.size(), 5u);
    ASSERT_EQ(f[k].features.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(r[k].features[i].same_shape(f[k].features[i]));
  }
  EXPECT_THROW(d.multiscale_forward({cond.levels[0]}, {real.levels[0]}), ShapeError);
}

TEST(Discriminator, ZeroWeightsScoreEqualsHeadBias) {
  MultiScaleDiscriminator<float> d(DiscriminatorSpec{.width_divisor = 16, .cond_planes = 5});
  for (int k = 0; k < 3; ++k) {
    auto ps = d.parameters(k);
    for (auto* p : ps) std::fill(p->value.begin(), p->value.end(), 0.3f * static_cast<float>(k + 1));
    for (auto* p : ps)
      if (p->name.find("weight") != std::string::npos) std::fill(p->value.begin(), p->value.end(), 0.f);
  }
  const auto cond = build_pyramid(random_image(1, 64, 64, 5, 11));
  const auto img = build_pyramid(random_image(1, 64, 64, 3, 12));
  const auto out = d.multiscale_forward(cond.levels, img.levels);
  for (int k = 0; k < 3; ++k)
    for (float v : out[k].score_map.span()) EXPECT_FLOAT_EQ(v, 0.3f * static_cast<float>(k + 1));
}

TEST(Discriminator, ScalesShareArchitectureButNotParameters) {
  auto d = small_d(13);
  auto printed = [&](int k) {
    LayerGraph g;
    g.notation = Notation::discriminator;
    g.layers = d.net(k).specs();
    return print_arch(g);
  };
  EXPECT_EQ(printed(0), printed(1));
  EXPECT_EQ(printed(1), printed(2));
  EXPECT_NE(d.parameters(0)[0]->value, d.parameters(1)[0]->value);
  EXPECT_NE(d.parameters(0)[0]->name, d.parameters(1)[0]->name);
}

TEST(Discriminator, CoarsestScaleSeesTwoHundredEightyPixels) {
  const LayerGraph g = parse_arch(kPatchDiscriminatorArch);
  EXPECT_EQ(receptive_field(g), 70);
  // Two 2x2 average-pool levels in front of the network, composed with the same recurrence.
  LayerGraph with_pool = g;
  for (int i = 0; i < 2; ++i)
    with_pool.layers.insert(with_pool.layers.begin(),
                            LayerSpec{.kind = LayerKind::patch_conv, .filters = 1, .kernel = 2, .stride = {2, 1}});
  EXPECT_EQ(receptive_field(with_pool), 280);
}

TEST(Discriminator, ScoreDependsOnlyOnItsPatch) {
  // InstanceNorm couples every output to every pixel through the per-plane
  // statistics, so locality is checked on the same conv geometry without it.
  LayerGraph g = scale_width(parse_arch(kPatchDiscriminatorArch), 16);
  for (auto& l : g.layers) l.norm = Norm::none;
  nn::Network<double> net(g, 4, "probe");
  std::mt19937_64 rng(14);
  auto ps = net.parameters();
  nn::init_normal<double>(ps, rng, 0.1);

  // Interval of input rows seen by output index o: [start + o * jump, start + o * jump + rf).
  double start = 0;
  int jump = 1, rf = 1;
  for (const auto& l : g.layers) {
    start -= l.padding * jump;
    rf += (l.kernel - 1) * jump;
    jump *= l.stride.num;
  }
  const int size = 96, py = 41, px = 57;
  Tensor<double> x(1, size, size, 4);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : x.span()) v = n(rng);
  const Tensor<double> a = net.forward(x);
  Tensor<double> xp = x;
  for (int c = 0; c < 4; ++c) xp(0, py, px, c) += 5.0;
  const Tensor<double> b = net.forward(xp);
  auto covers = [&](int o, int p) { return start + o * jump <= p && p < start + o * jump + rf; };
  int changed = 0;
  for (int oy = 0; oy < a.h(); ++oy)
    for (int ox = 0; ox < a.w(); ++ox) {
      const bool differs = a(0, oy, ox, 0) != b(0, oy, ox, 0);
      changed += differs;
      if (differs) {
        EXPECT_TRUE(covers(oy, py) && covers(ox, px)) << oy << "," << ox;
      }
    }
  EXPECT_GT(changed, 0);
  EXPECT_EQ(rf, 70);
}
