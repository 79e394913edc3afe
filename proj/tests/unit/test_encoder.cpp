#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "labelsynth/encoder.hpp"
#include "labelsynth/shapes_world.hpp"
#include "labelsynth/style_catalog.hpp"
#include "labelsynth/synthesis.hpp"
#include "support/oracles.hpp"

using namespace labelsynth;
using testing_support::random_image;

namespace {

std::vector<RegionIndex> one_region_index(const LabelMap& l, const InstanceMap& i) { return {RegionIndex::build(l, i)}; }

double sq(double v) { return v * v; }

double dist2(const StyleVector& a, const StyleVector& b) {
  return sq(a[0] - b[0]) + sq(a[1] - b[1]) + sq(a[2] - b[2]);
}

}  // namespace

TEST(InstancePool, ToyMapMean) {
  LabelMap label(2, 3, 3, 2);
  label.at(1, 2) = 0;
  InstanceMap inst(2, 3, 1);
  inst.at(1, 2) = 0;
  Tensor<double> raw(1, 2, 3, 3);
  const double a_values[5] = {1, 3, 1, 3, 2};
  for (int p = 0; p < 5; ++p)
    for (int c = 0; c < 3; ++c) raw[static_cast<std::size_t>(p) * 3 + c] = a_values[p];
  for (int c = 0; c < 3; ++c) raw(0, 1, 2, c) = 9;
  const Tensor<double> pooled = instance_average_pool(raw, one_region_index(label, inst));
  for (int p = 0; p < 5; ++p) EXPECT_DOUBLE_EQ(pooled[static_cast<std::size_t>(p) * 3], 2.0);
  EXPECT_DOUBLE_EQ(pooled(0, 1, 2, 0), 9.0);
}

TEST(InstancePool, PiecewiseConstantAndMeanPreserving) {
  auto [label, inst] = testing_support::random_scene(24, 32, 4, 5, 3);
  const auto regions = one_region_index(label, inst);
  const Tensor<double> raw = random_image(1, 24, 32, 3, 4).cast<double>();
  const Tensor<double> pooled = instance_average_pool(raw, regions);
  const RegionIndex& r = regions[0];
  std::vector<std::array<double, 3>> lo(r.keys.size(), {1e9, 1e9, 1e9}), hi(r.keys.size(), {-1e9, -1e9, -1e9});
  std::vector<std::array<double, 3>> raw_sum(r.keys.size(), {0, 0, 0}), pool_sum(r.keys.size(), {0, 0, 0});
  for (std::size_t p = 0; p < r.region_of_pixel.size(); ++p) {
    const auto k = static_cast<std::size_t>(r.region_of_pixel[p]);
    for (int c = 0; c < 3; ++c) {
      const double v = pooled[p * 3 + c];
      lo[k][c] = std::min(lo[k][c], v);
      hi[k][c] = std::max(hi[k][c], v);
      raw_sum[k][c] += raw[p * 3 + c];
      pool_sum[k][c] += v;
    }
  }
  for (std::size_t k = 0; k < r.keys.size(); ++k)
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(hi[k][c] - lo[k][c], 0.0, 1e-12);
      EXPECT_NEAR(raw_sum[k][c] / r.pixel_counts[k], pool_sum[k][c] / r.pixel_counts[k], 1e-6);
    }
  // Already constant per region: unchanged.
  const Tensor<double> again = instance_average_pool(pooled, regions);
  for (std::size_t i = 0; i < pooled.size(); ++i) EXPECT_NEAR(again[i], pooled[i], 1e-12);
}

TEST(InstancePool, GradientMatchesFiniteDifference) {
  auto [label, inst] = testing_support::random_scene(12, 12, 4, 3, 5);
  const auto regions = one_region_index(label, inst);
  Tensor<double> raw = random_image(1, 12, 12, 3, 6).cast<double>();
  const Tensor<double> w = random_image(1, 12, 12, 3, 7).cast<double>();
  auto loss = [&](const Tensor<double>& x) {
    const Tensor<double> p = instance_average_pool(x, regions);
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * p[i] * p[i];
    return s;
  };
  // d/dp of sum w p^2 is 2 w p; pooling is self-adjoint.
  const Tensor<double> pooled = instance_average_pool(raw, regions);
  Tensor<double> dp(1, 12, 12, 3);
  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = 2 * w[i] * pooled[i];
  const Tensor<double> analytic = instance_average_pool(dp, regions);
  for (std::size_t i : {0ul, 17ul, 200ul, 431ul}) {
    const double saved = raw[i];
    raw[i] = saved + 1e-6;
    const double up = loss(raw);
    raw[i] = saved - 1e-6;
    const double down = loss(raw);
    raw[i] = saved;
    const double numeric = (up - down) / 2e-6;
    EXPECT_NE(analytic[i], 0.0);
    EXPECT_NEAR(analytic[i], numeric, 1e-7 * std::max(1.0, std::fabs(numeric)));
  }
}

TEST(Encoder, OutputKeepsDimsWithThreePlanes) {
  Encoder<float> e("c3s1-4,d8,u4,c3s1-3");
  std::mt19937_64 rng(8);
  auto ps = e.parameters();
  nn::init_normal<float>(ps, rng, 0.1);
  const Tensor<float> raw = e.raw(random_image(2, 32, 48, 3, 9));
  EXPECT_EQ(raw.shape_string(), "[2,32,48,3]");
  EXPECT_THROW(Encoder<float>("c3s1-4,d8,u4,c3s1-5"), ShapeError);
}

TEST(KMeans, IdenticalPointsGiveDuplicateCenters) {
  const std::vector<StyleVector> pts(10, StyleVector{0.25f, -0.5f, 1.0f});
  const KMeansResult r = kmeans(pts, {.k = 10, .seed = 1});
  ASSERT_EQ(r.centers.size(), 10u);
  for (const auto& c : r.centers) EXPECT_EQ(c, pts[0]);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  std::mt19937_64 rng(10);
  std::normal_distribution<float> n(0.f, 0.05f);
  const StyleVector m0{-1.f, 0.5f, 0.f}, m1{1.f, -0.5f, 0.3f};
  std::vector<StyleVector> pts;
  std::array<double, 3> s0{}, s1{};
  for (int i = 0; i < 200; ++i) {
    const StyleVector& m = i % 2 ? m1 : m0;
    StyleVector p{m[0] + n(rng), m[1] + n(rng), m[2] + n(rng)};
    auto& s = i % 2 ? s1 : s0;
    for (int c = 0; c < 3; ++c) s[c] += p[c];
    pts.push_back(p);
  }
  const KMeansResult r = kmeans(pts, {.k = 2, .seed = 11});
  ASSERT_EQ(r.centers.size(), 2u);
  const StyleVector b0{float(s0[0] / 100), float(s0[1] / 100), float(s0[2] / 100)};
  const StyleVector b1{float(s1[0] / 100), float(s1[1] / 100), float(s1[2] / 100)};
  const bool order = dist2(r.centers[0], b0) < dist2(r.centers[0], b1);
  const StyleVector& c0 = order ? r.centers[0] : r.centers[1];
  const StyleVector& c1 = order ? r.centers[1] : r.centers[0];
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(c0[c], b0[c], 0.05);
    EXPECT_NEAR(c1[c], b1[c], 0.05);
  }
}

TEST(KMeans, InertiaMonotoneAndAssignmentsNearest) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<StyleVector> pts(500);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  const KMeansResult r = kmeans(pts, {.k = 10, .seed = 13});
  ASSERT_GE(r.inertia_history.size(), 2u);
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
    EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-9);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int best = 0;
    for (int c = 1; c < 10; ++c)
      if (dist2(pts[i], r.centers[c]) < dist2(pts[i], r.centers[best])) best = c;
    EXPECT_EQ(r.assignment[i], best);
  }
  const KMeansResult again = kmeans(pts, {.k = 10, .seed = 13});
  EXPECT_EQ(again.centers, r.centers);
}

TEST(StyleCatalog, FewerInstancesThanKAndEmptyClasses) {
  std::vector<InstanceFeature> f;
  for (int i = 0; i < 4; ++i) f.push_back({"s", i + 1, 2, {float(i), 0.f, 0.f}, 10});
  const StyleCatalog cat = build_style_catalog(f, {.k = 10, .seed = 0}, 4);
  ASSERT_NE(cat.find(2), nullptr);
  EXPECT_EQ(cat.find(2)->centers.size(), 4u);
  ASSERT_NE(cat.find(3), nullptr);
  EXPECT_TRUE(cat.find(3)->centers.empty());
}

TEST(StyleCatalog, JsonRoundTrip) {
  std::vector<InstanceFeature> f;
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int i = 0; i < 60; ++i) f.push_back({"s", i, i % 3, {u(rng), u(rng), u(rng)}, 5});
  const StyleCatalog cat = build_style_catalog(f, {.k = 10, .seed = 1}, 3);
  const auto path = std::filesystem::temp_directory_path() / "labelsynth_catalog.json";
  cat.save(path.string());
  const StyleCatalog back = StyleCatalog::load(path.string());
  ASSERT_EQ(back.classes.size(), cat.classes.size());
  for (const auto& [c, styles] : cat.classes) {
    EXPECT_EQ(back.find(c)->centers, styles.centers);
    EXPECT_EQ(back.find(c)->counts, styles.counts);
  }
  EXPECT_EQ(back.k, 10);
}

namespace {

StyleCatalog distinct_catalog() {
  StyleCatalog cat;
  for (int c = 0; c < 4; ++c) {
    ClassStyles s;
    for (int k = 0; k < 10; ++k) {
      s.centers.push_back({0.1f * k, 0.01f * c, -0.1f * k});
      s.counts.push_back(1);
    }
    cat.classes[c] = s;
  }
  return cat;
}

}  // namespace

TEST(SampleStyles, ExplicitIndexAndSeededRandom) {
  auto [label, inst] = testing_support::random_scene(32, 32, 4, 4, 15);
  const StyleCatalog cat = distinct_catalog();
  std::map<int32_t, StyleSelection> sel;
  const RegionIndex regions = RegionIndex::build(label, inst);
  for (const auto& k : regions.keys) sel[k.instance_id] = StyleSelection::cluster(0);
  const StyleVectors zero = sample_styles(cat, label, inst, sel, 0);
  for (const auto& [k, v] : zero) EXPECT_EQ(v, cat.find(k.class_id)->centers[0]);
  const StyleVectors a = sample_styles(cat, label, inst, {}, 99), b = sample_styles(cat, label, inst, {}, 99);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), regions.keys.size());
  sel[regions.keys.back().instance_id] = StyleSelection::cluster(10);
  EXPECT_THROW(sample_styles(cat, label, inst, sel, 0), SelectionError);
}

TEST(SampleStyles, ChangingOneClusterChangesOnlyThatInstance) {
  auto [label, inst] = testing_support::random_scene(32, 40, 4, 4, 16);
  const RegionIndex regions = RegionIndex::build(label, inst);
  int32_t target = 0;
  for (const auto& k : regions.keys) target = std::max(target, k.instance_id);
  ASSERT_GT(target, 0);
  const StyleCatalog cat = distinct_catalog();
  std::map<int32_t, StyleSelection> sel{{target, StyleSelection::cluster(1)}};
  const StyleVectors s1 = sample_styles(cat, label, inst, sel, 7);
  sel[target] = StyleSelection::cluster(6);
  const StyleVectors s2 = sample_styles(cat, label, inst, sel, 7);
  const ConditioningTensor c1 = build_conditioning(label, inst, &s1), c2 = build_conditioning(label, inst, &s2);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) {
      bool differs = false;
      for (int c = 0; c < c1.plane_count(); ++c) differs |= c1.planes(0, y, x, c) != c2.planes(0, y, x, c);
      EXPECT_EQ(differs, inst.at(y, x) == target) << y << "," << x;
    }
}

TEST(Harvest, OneRecordPerRegionAndDeterministic) {
  const Dataset d = generate_shapes_dataset({.seed = 17, .count = 100, .height = 32, .width = 32});
  GanModel<float> m(ModelSpec{.num_classes = 4, .use_encoder = true, .width_divisor = 8,
                              .encoder_arch = "c3s1-4,d8,u4,c3s1-3"});
  m.init_weights(18);
  const auto records = harvest_features(m, d);
  std::size_t expected = 0;
  for (const auto& s : d.samples) expected += d.meta.at("samples").at(s.id).size();
  EXPECT_EQ(records.size(), expected);
  EXPECT_EQ(harvest_features(m, d).size(), records.size());
  const auto again = harvest_features(m, d);
  std::map<std::string, const SamplePair*> by_id;
  for (const auto& s : d.samples) by_id[s.id] = &s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].vector, again[i].vector);
    const SamplePair& s = *by_id.at(records[i].sample_id);
    bool found = false;
    for (std::size_t p = 0; p < s.label.size() && !found; ++p)
      if (s.instance.grid[p] == records[i].instance_id && s.label.grid[p] == records[i].class_id) found = true;
    EXPECT_TRUE(found);
    for (float v : records[i].vector) EXPECT_TRUE(std::isfinite(v));
  }
}
