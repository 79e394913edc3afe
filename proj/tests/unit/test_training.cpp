#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "labelsynth/bundle.hpp"
#include "labelsynth/png_io.hpp"
#include "labelsynth/shapes_world.hpp"
#include "labelsynth/training.hpp"

using namespace labelsynth;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("labelsynth_train_" + name);
  fs::remove_all(p);
  return p;
}

TrainConfig small_config(std::vector<PhaseConfig> phases, int divisor = 16) {
  TrainConfig c;
  c.model.width_divisor = divisor;
  c.batch_size = 2;
  c.phases = std::move(phases);
  return c;
}

std::vector<std::vector<float>> values(const std::vector<nn::Parameter<float>*>& ps) {
  std::vector<std::vector<float>> out;
  for (auto* p : ps) out.emplace_back(p->value.begin(), p->value.end());
  return out;
}

std::vector<const SamplePair*> all_of(const Dataset& d, std::size_t n) {
  std::vector<const SamplePair*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(&d.samples[i]);
  return out;
}

}  // namespace

TEST(LearningRate, ConstantThenLinearDecay) {
  EXPECT_DOUBLE_EQ(learning_rate(2e-4, 100, 100, 0), 2e-4);
  EXPECT_DOUBLE_EQ(learning_rate(2e-4, 100, 100, 99), 2e-4);
  EXPECT_NEAR(learning_rate(2e-4, 100, 100, 150), 2e-4 * (1.0 - 50.0 / 100.0), 1e-15);
  EXPECT_NEAR(learning_rate(2e-4, 100, 100, 150), 1e-4, 1e-15);
  EXPECT_NEAR(learning_rate(2e-4, 100, 100, 199), 2e-4 / 100, 1e-15);
  EXPECT_EQ(learning_rate(2e-4, 100, 100, 200), 0.0);
  EXPECT_EQ(learning_rate(2e-4, 100, 100, 1000), 0.0);
  EXPECT_NEAR(learning_rate(1.0, 2, 4, 3), 0.75, 1e-15);
}

TEST(PhaseConfig, DefaultConstantIsHalf) {
  PhaseConfig p{.epochs = 9};
  EXPECT_EQ(p.constant(), 4);
  EXPECT_EQ(p.decay(), 5);
}

TEST(InitWeights, GaussianStatistics) {
  GanModel<float> m(ModelSpec{.width_divisor = 4});
  m.init_weights(1);
  std::vector<double> w;
  for (auto* p : m.all_parameters()) {
    const bool is_weight = p->name.size() >= 6 && p->name.compare(p->name.size() - 6, 6, "weight") == 0;
    for (float v : p->value) {
      if (is_weight) w.push_back(v);
      else
        ASSERT_EQ(v, 0.0f) << p->name;
    }
  }
  ASSERT_GE(w.size(), 100000u);
  const double n = static_cast<double>(w.size());
  double mean = 0;
  for (double v : w) mean += v;
  mean /= n;
  double var = 0;
  for (double v : w) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1));
  EXPECT_LT(std::fabs(mean), 3 * 0.02 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.02, 0.02 * 0.05);

  GanModel<float> again(ModelSpec{.width_divisor = 4});
  again.init_weights(1);
  EXPECT_EQ(serialize_bundle(bundle_from_model(m)), serialize_bundle(bundle_from_model(again)));
}

TEST(TrainStep, ZeroLearningRateKeepsParameters) {
  const Dataset d = generate_shapes_dataset({.seed = 2, .count = 4, .height = 64, .width = 64});
  const TrainConfig c = small_config({{PhaseKind::global, 1, -1, true}});
  GanModel<float> m(c.model);
  m.init_weights(3);
  Trainer t(c, m);
  t.begin_phase(0);
  const auto before = values(m.all_parameters());
  const LossReport r = t.train_step(all_of(d, 2), 0.0);
  EXPECT_EQ(values(m.all_parameters()), before);
  EXPECT_TRUE(std::isfinite(r.g_total));
  EXPECT_TRUE(std::isfinite(r.d_total));
}

TEST(TrainStep, DiscriminatorStepLeavesGeneratorUntouched) {
  const Dataset d = generate_shapes_dataset({.seed = 4, .count = 2, .height = 64, .width = 64});
  const TrainConfig c = small_config({{PhaseKind::global, 1, -1, true}});
  GanModel<float> m(c.model);
  m.init_weights(5);
  GanObjective<float> obj(m, c.weights);
  std::vector<const LabelMap*> l{&d.samples[0].label, &d.samples[1].label};
  std::vector<const InstanceMap*> i{&d.samples[0].instance, &d.samples[1].instance};
  std::vector<const Tensor<float>*> x{&d.samples[0].image, &d.samples[1].image};
  const auto in = make_step_input<float>(l, i, x, true, false, true);
  GanObjective<float>::State st;
  obj.forward_generator(in, st);
  auto gp = m.generator_parameters();
  nn::zero_grads<float>(gp);
  const auto before = values(gp);
  LossReport rep;
  obj.d_step(in, st, {0, 1, 2}, rep);
  nn::Adam<float> d_opt(m.discriminator_parameters());
  d_opt.step(1e-3);
  EXPECT_EQ(values(gp), before);
  for (auto* p : gp)
    for (float g : p->grad) ASSERT_EQ(g, 0.0f) << p->name;
}

TEST(TrainStep, GeneratorAdversarialLossDropsOnToySet) {
  const Dataset d = generate_shapes_dataset({.seed = 6, .count = 4, .height = 32, .width = 64});
  std::vector<double> drops;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c = small_config({{PhaseKind::global, 50, 50, false}}, 8);
    c.model.with_enhancer = false;
    c.batch_size = 4;
    c.seed = seed;
    GanModel<float> m(c.model);
    m.init_weights(seed);
    Trainer t(c, m);
    t.begin_phase(0);
    double first = 0, last = 0;
    for (int s = 0; s < 50; ++s) {
      const LossReport r = t.train_step(all_of(d, 4), c.lr);
      if (s == 0) first = r.g_gan_total;
      last = r.g_gan_total;
    }
    drops.push_back((first - last) / first);
  }
  std::sort(drops.begin(), drops.end());
  RecordProperty("median_g_gan_drop", std::to_string(drops[2]));
  EXPECT_GE(drops[2], 0.10);
}

TEST(Schedule, ThreePhasesEmitCheckpointsAndFreezeG1) {
  const Dataset d = generate_shapes_dataset({.seed = 7, .count = 20, .height = 64, .width = 64});
  TrainConfig c = small_config({{PhaseKind::global, 2, -1, true}, {PhaseKind::enhancer, 2, -1, false},
                                {PhaseKind::joint, 2, -1, false}});
  c.batch_size = 4;
  const fs::path out = scratch("schedule");
  GanModel<float> m(c.model);
  std::vector<std::vector<std::vector<float>>> g1_during_enhancer;
  std::vector<std::vector<float>> g1_after_phase0;
  int last_phase = -1;
  RunOptions opt{.out_dir = out.string()};
  opt.on_step = [&](const StepLog& s) {
    if (s.phase == 1) g1_during_enhancer.push_back(values(m.generator.g1_parameters()));
    last_phase = s.phase;
  };
  const RunResult r = run_schedule(c, d, m, opt);
  EXPECT_EQ(r.steps, 3 * 2 * 5);
  EXPECT_GE(r.checkpoints.size(), 3u);
  for (const auto& p : r.checkpoints) EXPECT_TRUE(fs::exists(p)) << p;
  EXPECT_TRUE(fs::exists(out / "latest.lsb"));
  EXPECT_EQ(last_phase, 2);

  // g1 during phase 2 equals the phase-1 checkpoint bit for bit.
  GanModel<float> ck = model_from_bundle(load_bundle((out / "ckpt_p0_e002.lsb").string()));
  const auto expected = values(ck.generator.g1_parameters());
  ASSERT_EQ(g1_during_enhancer.size(), 10u);
  for (const auto& v : g1_during_enhancer) EXPECT_EQ(v, expected);
  GanModel<float> after_enh = model_from_bundle(load_bundle((out / "ckpt_p1_e002.lsb").string()));
  EXPECT_EQ(values(after_enh.generator.g1_parameters()), expected);
  EXPECT_NE(values(after_enh.generator.g2_parameters()), values(ck.generator.g2_parameters()));
  EXPECT_NE(values(m.generator.g1_parameters()), expected);

  // One JSON line per step.
  std::ifstream log(out / "train_log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("g_gan") && j.contains("d_total") && j.contains("phase"));
  }
  EXPECT_EQ(lines, 30);
}

TEST(Schedule, RejectsDimsIndivisibleByPhaseFactor) {
  const Dataset d = generate_shapes_dataset({.seed = 8, .count = 2, .height = 32, .width = 64});
  const TrainConfig c = small_config({{PhaseKind::global, 1, -1, true}});
  GanModel<float> m(c.model);
  EXPECT_THROW(run_schedule(c, d, m), ConfigError);
}

TEST(Schedule, ResumeRefusesChangedConfigUnlessForced) {
  const Dataset d = generate_shapes_dataset({.seed = 9, .count = 4, .height = 64, .width = 64});
  TrainConfig c = small_config({{PhaseKind::global, 2, -1, true}});
  c.checkpoint_every = 1;
  const fs::path out = scratch("resume");
  GanModel<float> m(c.model);
  run_schedule(c, d, m, {.out_dir = out.string()});
  const std::string ckpt = (out / "ckpt_p0_e001.lsb").string();

  TrainConfig changed = c;
  changed.lr = 1e-4;
  GanModel<float> m2(c.model);
  EXPECT_THROW(run_schedule(changed, d, m2, {.out_dir = scratch("resume2").string(), .resume = ckpt}), ConfigError);
  EXPECT_NO_THROW(
      run_schedule(changed, d, m2, {.out_dir = scratch("resume3").string(), .resume = ckpt, .force = true}));

  // Resuming with the same config from epoch 1 reproduces the uninterrupted run.
  GanModel<float> m3(c.model);
  const RunResult rr = run_schedule(c, d, m3, {.out_dir = scratch("resume4").string(), .resume = ckpt});
  EXPECT_EQ(rr.steps, 4);
  EXPECT_EQ(values(m3.all_parameters()), values(m.all_parameters()));
}

TEST(Schedule, TenStepsAreReproducible) {
  const Dataset d = generate_shapes_dataset({.seed = 10, .count = 20, .height = 64, .width = 64});
  TrainConfig c = small_config({{PhaseKind::global, 1, -1, true}});
  auto run = [&] {
    GanModel<float> m(c.model);
    return run_schedule(c, d, m).log;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].to_json().dump(), b[i].to_json().dump()) << "step " << i;
}

TEST(Schedule, NonFiniteLossWritesSnapshot) {
  const Dataset d = generate_shapes_dataset({.seed = 11, .count = 8, .height = 64, .width = 64});
  const TrainConfig c = small_config({{PhaseKind::global, 1, -1, true}});
  const fs::path out = scratch("nonfinite");
  GanModel<float> m(c.model);
  RunOptions opt{.out_dir = out.string()};
  opt.on_step = [&](const StepLog& s) {
    if (s.step == 2) m.generator.g1_parameters()[0]->value[0] = std::numeric_limits<float>::quiet_NaN();
  };
  try {
    run_schedule(c, d, m, opt);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(fs::exists(out / "nonfinite_snapshot.lsb"));
}

TEST(Bundle, SaveLoadSaveIsByteIdentical) {
  GanModel<float> m(ModelSpec{.use_encoder = true, .width_divisor = 16});
  m.init_weights(12);
  const fs::path dir = scratch("bundle");
  fs::create_directories(dir);
  const std::string a = (dir / "a.lsb").string(), b = (dir / "b.lsb").string();
  save_bundle(a, bundle_from_model(m, {{"note", "x"}}));
  const Bundle loaded = load_bundle(a);
  save_bundle(b, loaded);
  EXPECT_EQ(png::read_bytes(a), png::read_bytes(b));
  GanModel<float> back = model_from_bundle(loaded);
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(values(back.all_parameters()), values(m.all_parameters()));
}

TEST(Bundle, CorruptionIsRejectedWithoutPartialLoad) {
  GanModel<float> m(ModelSpec{.width_divisor = 16});
  m.init_weights(13);
  auto bytes = serialize_bundle(bundle_from_model(m));
  for (std::size_t pos : {std::size_t{3}, bytes.size() / 2, bytes.size() - 2}) {
    auto bad = bytes;
    bad[pos] ^= 0x5a;
    EXPECT_THROW(parse_bundle(bad), IntegrityError) << pos;
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() / 3);
  EXPECT_THROW(parse_bundle(truncated), IntegrityError);

  GanModel<float> target(ModelSpec{.width_divisor = 16});
  target.init_weights(14);
  const auto before = values(target.all_parameters());
  Bundle b = parse_bundle(bytes);
  b.arrays.back().data.pop_back();
  b.arrays.back().shape = {static_cast<int>(b.arrays.back().data.size())};
  EXPECT_THROW(load_parameters(b, target), ShapeError);
  EXPECT_EQ(values(target.all_parameters()), before);
}

TEST(Bundle, WidthMismatchNamesFirstParameter) {
  GanModel<float> m(ModelSpec{.width_divisor = 16});
  m.init_weights(15);
  const Bundle b = bundle_from_model(m);
  GanModel<float> wider(ModelSpec{.width_divisor = 8});
  const std::string first = wider.all_parameters().front()->name;
  try {
    load_parameters(b, wider);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find(first), std::string::npos) << e.what();
  }
}

TEST(TrainConfigJson, RoundTripAndHash) {
  TrainConfig c = TrainConfig::desk_default(3, 1, 1);
  c.model.use_encoder = true;
  c.weights.lambda_perc = 10;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  TrainConfig other = c;
  other.seed = 1;
  EXPECT_NE(other.hash(), c.hash());
  EXPECT_THROW(TrainConfig::from_json({{"phases", {{{"kind", "sideways"}, {"epochs", 1}}}}}), ConfigError);
}
