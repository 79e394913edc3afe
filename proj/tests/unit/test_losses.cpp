#include <gtest/gtest.h>

#include <cmath>

#include "labelsynth/losses.hpp"
#include "labelsynth/objective.hpp"
#include "support/oracles.hpp"

using namespace labelsynth;
using testing_support::random_image;

namespace {

Tensor<double> filled(int h, int w, double v) { return Tensor<double>(1, h, w, 1, v); }

// Independent layer-mean L1 sum.
double layer_mean_l1(const std::vector<Tensor<double>>& a, const std::vector<Tensor<double>>& b) {
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < a[i].size(); ++j) s += std::fabs(a[i][j] - b[i][j]);
    total += s / static_cast<double>(a[i].size());
  }
  return total;
}

ModelSpec tiny_spec(bool encoder) {
  ModelSpec s;
  s.num_classes = 3;
  s.use_encoder = encoder;
  s.width_divisor = 1;
  s.global_arch = "c3s1-4,d6,R6,u4,c3s1-3";
  s.enhancer_arch = "c3s1-3,d4,R4,u3,c3s1-3";
  s.discriminator_arch = "C4-C6";
  s.encoder_arch = "c3s1-3,d4,u3,c3s1-3";
  return s;
}

struct Batch {
  std::vector<LabelMap> labels;
  std::vector<InstanceMap> instances;
  std::vector<Tensor<float>> images;
  template <typename T>
  StepInput<T> input(bool composed, bool half = false) const {
    std::vector<const LabelMap*> l;
    std::vector<const InstanceMap*> i;
    std::vector<const Tensor<float>*> x;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      l.push_back(&labels[k]);
      i.push_back(&instances[k]);
      x.push_back(&images[k]);
    }
    return make_step_input<T>(l, i, x, half, composed, true);
  }
};

Batch tiny_batch(int n, int size, std::uint64_t seed) {
  Batch b;
  for (int k = 0; k < n; ++k) {
    auto [label, inst] = testing_support::random_scene(size, size, 3, 2, seed + k);
    b.labels.push_back(label);
    b.instances.push_back(inst);
    b.images.push_back(random_image(1, size, size, 3, seed + 100 + k, -0.9f, 0.9f));
  }
  return b;
}

}  // namespace

TEST(Lsgan, DiscriminatorUnitValues) {
  EXPECT_DOUBLE_EQ(lsgan_d_loss(filled(4, 4, 1), filled(4, 4, 0)), 0.0);
  EXPECT_DOUBLE_EQ(lsgan_d_loss(filled(4, 4, 0), filled(4, 4, 1)), 1.0);
  EXPECT_DOUBLE_EQ(lsgan_d_loss(filled(4, 4, 0.5), filled(4, 4, 0.5)), 0.25);
}

TEST(Lsgan, GeneratorUnitValues) {
  EXPECT_DOUBLE_EQ(lsgan_g_loss(filled(3, 5, 1)), 0.0);
  EXPECT_DOUBLE_EQ(lsgan_g_loss(filled(3, 5, 0)), 0.5);
  const std::vector<Tensor<double>> scales{filled(4, 4, 0), filled(2, 2, 0), filled(1, 1, 0)};
  EXPECT_DOUBLE_EQ(lsgan_g_loss(scales), 1.5);
}

TEST(Lsgan, ScaleSumEqualsPerScaleSum) {
  std::vector<Tensor<double>> real, fake;
  double expect_d = 0, expect_g = 0;
  for (int k = 0; k < 3; ++k) {
    real.push_back(random_image(2, 8 >> k, 8 >> k, 1, 10 + k).cast<double>());
    fake.push_back(random_image(2, 8 >> k, 8 >> k, 1, 20 + k).cast<double>());
    expect_d += lsgan_d_loss(real[k], fake[k]);
    expect_g += lsgan_g_loss(fake[k]);
  }
  EXPECT_NEAR(lsgan_d_loss(real, fake), expect_d, 1e-6);
  EXPECT_NEAR(lsgan_g_loss(fake), expect_g, 1e-6);
  EXPECT_GE(expect_d, 0);
}

TEST(Lsgan, AnalyticGradientMatchesDefinition) {
  const Tensor<double> fake = random_image(1, 3, 3, 1, 30).cast<double>();
  Tensor<double> grad;
  lsgan_g_loss(fake, &grad);
  for (std::size_t i = 0; i < fake.size(); ++i) EXPECT_NEAR(grad[i], (fake[i] - 1.0) / 9.0, 1e-12);
}

TEST(FeatureMatching, UnitValues) {
  const std::vector<Tensor<double>> a{random_image(1, 5, 5, 4, 1).cast<double>()};
  EXPECT_DOUBLE_EQ(layer_l1_loss(a, a), 0.0);
  for (int size : {1, 7, 16}) {
    const std::vector<Tensor<double>> ones{Tensor<double>(2, size, size, 3, 1.0)};
    const std::vector<Tensor<double>> zeros{Tensor<double>(2, size, size, 3, 0.0)};
    EXPECT_DOUBLE_EQ(layer_l1_loss(ones, zeros), 1.0);
  }
  const std::vector<Tensor<double>> r{Tensor<double>(1, 4, 4, 2, 1.0), Tensor<double>(1, 2, 2, 8, 0.5)};
  const std::vector<Tensor<double>> f{Tensor<double>(1, 4, 4, 2, 0.0), Tensor<double>(1, 2, 2, 8, 0.0)};
  EXPECT_DOUBLE_EQ(layer_l1_loss(r, f), 1.5);
}

TEST(FeatureMatching, SumsOverScales) {
  std::vector<std::vector<Tensor<double>>> real(3), fake(3);
  double expect = 0;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 2; ++i) {
      real[k].push_back(random_image(1, 6, 6, 2 + i, 40 + 10 * k + i).cast<double>());
      fake[k].push_back(random_image(1, 6, 6, 2 + i, 90 + 10 * k + i).cast<double>());
    }
    expect += layer_mean_l1(real[k], fake[k]);
  }
  EXPECT_NEAR(feature_matching_loss(real, fake), expect, 1e-12);
}

TEST(FeatureMatching, ShapeMismatchRejected) {
  const std::vector<Tensor<double>> a{Tensor<double>(1, 4, 4, 2)}, b{Tensor<double>(1, 4, 4, 3)};
  EXPECT_THROW(layer_l1_loss(a, b), ShapeError);
}

TEST(Perceptual, MatchesIndependentLayerMeans) {
  nn::Network<double> net(parse_arch("c3s1-4,d6,d8,u6,u4"), 3, "feat");
  std::mt19937_64 rng(50);
  auto ps = net.parameters();
  nn::init_normal<double>(ps, rng, 0.2);
  const Tensor<double> x = random_image(1, 16, 16, 3, 51).cast<double>();
  const Tensor<double> g = random_image(1, 16, 16, 3, 52).cast<double>();
  EXPECT_DOUBLE_EQ(perceptual_loss(x, x, net, 5), 0.0);
  nn::Network<double>::Trace tx, tg;
  net.forward(x, &tx);
  net.forward(g, &tg);
  EXPECT_NEAR(perceptual_loss(x, g, net, 5), layer_mean_l1(tx.outputs, tg.outputs), 1e-5);
  std::vector<Tensor<double>> first3x(tx.outputs.begin(), tx.outputs.begin() + 3);
  std::vector<Tensor<double>> first3g(tg.outputs.begin(), tg.outputs.begin() + 3);
  EXPECT_NEAR(perceptual_loss(x, g, net, 3), layer_mean_l1(first3x, first3g), 1e-5);
}

TEST(Report, TotalsFollowWeights) {
  LossReport r;
  finalize_report(r, LossWeights{});
  EXPECT_EQ(r.g_total, 0.0);
  EXPECT_EQ(r.d_total, 0.0);

  LossReport s;
  s.g_gan = {0.1, 0.1, 0.1};
  s.g_fm = {0.05, 0.05, 0.1};
  s.g_perc = 7.0;
  s.d_real = {0.2, 0.3};
  s.d_fake = {0.1, 0.0};
  finalize_report(s, LossWeights{.lambda_fm = 10, .lambda_perc = 0});
  EXPECT_NEAR(s.g_total, 2.3, 1e-6);
  EXPECT_NEAR(s.d_total, 0.6, 1e-6);
  EXPECT_NEAR(s.g_gan_total, 0.3, 1e-6);
}

TEST(Report, NegativeWeightsRejected) {
  EXPECT_THROW(LossWeights{.lambda_fm = -1}.validate(), ConfigError);
  GanModel<double> m(tiny_spec(false));
  EXPECT_THROW(GanObjective<double>(m, LossWeights{.lambda_perc = -2}), ConfigError);
}

class GradientCheck : public ::testing::TestWithParam<bool> {};

TEST_P(GradientCheck, GeneratorGradientMatchesFiniteDifferences) {
  const bool with_encoder = GetParam();
  GanModel<double> m(tiny_spec(with_encoder));
  m.init_weights(60, 0.3);
  m.generator.set_mode(GeneratorMode::composed);
  const auto params = m.generator_parameters();
  std::size_t total = 0;
  for (auto* p : params) total += p->size();
  for (auto* p : m.discriminator_parameters()) total += p->size();
  ASSERT_LE(total, 10000u);

  nn::Network<double> feat(parse_arch("c3s1-4,d4"), 3, "feat");
  std::mt19937_64 rng(61);
  auto fp = feat.parameters();
  nn::init_normal<double>(fp, rng, 0.3);
  feat.set_frozen(true);

  const Batch batch = tiny_batch(2, 16, 62);
  const StepInput<double> in = batch.input<double>(true);
  GanObjective<double> obj(m, LossWeights{.lambda_fm = 10, .lambda_perc = 10}, &feat, 2);
  const std::vector<int> scales{0, 1, 2};
  GanObjective<double>::State st;
  obj.forward_generator(in, st);
  LossReport rep;
  obj.d_step(in, st, scales, rep);
  obj.g_step(in, st, scales, rep);
  finalize_report(rep, obj.weights());
  EXPECT_NEAR(rep.g_total, obj.g_objective(in, scales), 1e-9);
  EXPECT_GT(rep.g_perc, 0.0);

  // Biases feeding InstanceNorm have an identically zero gradient; their finite
  // differences are pure round-off, so they are checked absolutely and do not
  // count toward the 20 relative checks.
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  const double h = 1e-5;
  double worst = 0;
  int checked = 0, vanishing = 0;
  while (checked < 20) {
    auto* p = params[pick_param(rng)];
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p->size() - 1)(rng);
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = obj.g_objective(in, scales);
    p->value[i] = saved - h;
    const double down = obj.g_objective(in, scales);
    p->value[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p->grad[i];
    if (std::fabs(analytic) < 1e-12 && std::fabs(numeric) < 1e-8) {
      ASSERT_LT(++vanishing, 200);
      continue;
    }
    const double rel = std::fabs(numeric - analytic) / std::max(std::fabs(numeric), std::fabs(analytic));
    worst = std::max(worst, rel);
    ++checked;
    EXPECT_LT(rel, 1e-4) << p->name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(Encoder, GradientCheck, ::testing::Values(false, true));

TEST(Objective, FeatureMatchingNeverReachesDiscriminator) {
  GanModel<double> m(tiny_spec(false));
  m.init_weights(70, 0.3);
  m.generator.set_mode(GeneratorMode::composed);
  const Batch batch = tiny_batch(2, 16, 71);
  const StepInput<double> in = batch.input<double>(true);
  const std::vector<int> scales{0, 1, 2};

  auto d_grads = [&](double lambda_fm) {
    GanObjective<double> obj(m, LossWeights{.lambda_fm = lambda_fm});
    GanObjective<double>::State st;
    obj.forward_generator(in, st);
    LossReport rep;
    obj.d_step(in, st, scales, rep);
    std::vector<std::vector<double>> g;
    for (auto* p : m.discriminator_parameters()) g.emplace_back(p->grad.begin(), p->grad.end());
    return g;
  };
  EXPECT_EQ(d_grads(0.0), d_grads(10.0));

  // The generator step leaves discriminator gradients untouched at zero.
  GanObjective<double> obj(m, LossWeights{});
  GanObjective<double>::State st;
  obj.forward_generator(in, st);
  LossReport rep;
  obj.d_step(in, st, scales, rep);
  auto dp = m.discriminator_parameters();
  nn::zero_grads<double>(dp);
  obj.g_step(in, st, scales, rep);
  EXPECT_GT(rep.g_fm_total, 0.0);
  for (auto* p : dp)
    for (double v : p->grad) ASSERT_EQ(v, 0.0) << p->name;
}

TEST(Objective, ScaleByScaleEqualsBatched) {
  GanModel<double> m(tiny_spec(false));
  m.init_weights(80, 0.3);
  const Batch batch = tiny_batch(2, 16, 81);
  const StepInput<double> in = batch.input<double>(false);
  GanObjective<double> obj(m, LossWeights{});
  GanObjective<double>::State st;
  obj.forward_generator(in, st);
  LossReport all;
  obj.d_step(in, st, {0, 1, 2}, all);
  finalize_report(all, obj.weights());
  double split = 0;
  for (int k = 0; k < 3; ++k) {
    LossReport one;
    obj.d_step(in, st, {k}, one);
    finalize_report(one, obj.weights());
    split += one.d_total;
  }
  EXPECT_NEAR(all.d_total, split, 1e-6);
  LossReport g_all;
  obj.d_step(in, st, {0, 1, 2}, g_all);
  obj.g_step(in, st, {0, 1, 2}, g_all);
  finalize_report(g_all, obj.weights());
  double g_split = 0;
  for (int k = 0; k < 3; ++k) {
    LossReport one;
    obj.d_step(in, st, {k}, one);
    obj.g_step(in, st, {k}, one);
    finalize_report(one, obj.weights());
    g_split += one.g_total;
  }
  EXPECT_NEAR(g_all.g_total, g_split, 1e-6);
  for (double v : g_all.g_gan) EXPECT_GE(v, 0.0);
  for (double v : g_all.g_fm) EXPECT_GE(v, 0.0);
}
