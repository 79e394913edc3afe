#include "labelsynth/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "labelsynth/evaluation.hpp"

namespace labelsynth {

namespace fs = std::filesystem;

PhaseKind phase_kind_from_string(const std::string& s) {
  if (s == "global") return PhaseKind::global;
  if (s == "enhancer") return PhaseKind::enhancer;
  if (s == "joint") return PhaseKind::joint;
  throw ConfigError("unknown phase kind '" + s + "' (expected global, enhancer, or joint)");
}

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::global: return "global";
    case PhaseKind::enhancer: return "enhancer";
    case PhaseKind::joint: return "joint";
  }
  return "?";
}

TrainConfig TrainConfig::desk_default(int global_epochs, int enhancer_epochs, int joint_epochs) {
  TrainConfig c;
  c.phases = {{PhaseKind::global, global_epochs, -1, true},
              {PhaseKind::enhancer, enhancer_epochs, -1, false},
              {PhaseKind::joint, joint_epochs, -1, false}};
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json phases_json = nlohmann::json::array();
  for (const auto& p : phases)
    phases_json.push_back({{"kind", labelsynth::to_string(p.kind)},
                           {"epochs", p.epochs},
                           {"constant_epochs", p.constant_epochs},
                           {"half_resolution", p.half_resolution}});
  return {{"model", model.to_json()},
          {"loss", {{"lambda_fm", weights.lambda_fm}, {"lambda_perc", weights.lambda_perc}}},
          {"optimizer", {{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}}},
          {"batch_size", batch_size},
          {"seed", seed},
          {"phases", phases_json},
          {"checkpoint_every", checkpoint_every},
          {"perceptual_net", perceptual_net}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = ModelSpec::from_json(j["model"]);
    if (j.contains("loss")) {
      c.weights.lambda_fm = j["loss"].value("lambda_fm", c.weights.lambda_fm);
      c.weights.lambda_perc = j["loss"].value("lambda_perc", c.weights.lambda_perc);
    }
    if (j.contains("optimizer")) {
      c.lr = j["optimizer"].value("lr", c.lr);
      c.beta1 = j["optimizer"].value("beta1", c.beta1);
      c.beta2 = j["optimizer"].value("beta2", c.beta2);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.perceptual_net = j.value("perceptual_net", c.perceptual_net);
    if (j.contains("phases")) {
      for (const auto& p : j["phases"]) {
        PhaseConfig pc;
        pc.kind = phase_kind_from_string(p.at("kind").get<std::string>());
        pc.epochs = p.at("epochs").get<int>();
        pc.constant_epochs = p.value("constant_epochs", -1);
        pc.half_resolution = p.value("half_resolution", pc.kind == PhaseKind::global && c.model.with_enhancer);
        c.phases.push_back(pc);
      }
    } else {
      c.phases = desk_default().phases;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.weights.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string TrainConfig::hash() const {
  // FNV-1a over the canonical (key-sorted) JSON dump.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void TrainConfig::validate(int h, int w) const {
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (phases.empty()) throw ConfigError("at least one phase is required");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& p = phases[i];
    const std::string where = "phase " + std::to_string(i) + " (" + labelsynth::to_string(p.kind) + ")";
    if (p.epochs <= 0) throw ConfigError(where + ": epochs must be positive");
    if (p.constant() > p.epochs) throw ConfigError(where + ": constant_epochs exceeds epochs");
    if (p.kind != PhaseKind::global && !model.with_enhancer)
      throw ConfigError(where + ": model has no local enhancer");
    if (p.kind != PhaseKind::global && p.half_resolution)
      throw ConfigError(where + ": only the global phase may run at half resolution");
    const int div = p.half_resolution ? 64 : 32;
    if (h % div != 0 || w % div != 0)
      throw ConfigError(where + ": sample dims " + std::to_string(h) + "x" + std::to_string(w) +
                        " must be multiples of " + std::to_string(div));
  }
}

double learning_rate(double base, int constant_epochs, int decay_epochs, int epoch) {
  if (epoch < constant_epochs) return base;
  if (decay_epochs <= 0) return 0.0;
  const double f = 1.0 - static_cast<double>(epoch - constant_epochs) / static_cast<double>(decay_epochs);
  return f > 0 ? base * f : 0.0;
}

nlohmann::json StepLog::to_json() const {
  return {{"step", step},
          {"phase", phase},
          {"epoch", epoch},
          {"lr", lr},
          {"g_gan", losses.g_gan_total},
          {"g_fm", losses.g_fm_total},
          {"g_perc", losses.g_perc},
          {"g_total", losses.g_total},
          {"d_real", losses.d_real_total},
          {"d_fake", losses.d_fake_total},
          {"d_total", losses.d_total},
          {"g_gan_per_scale", losses.g_gan},
          {"g_fm_per_scale", losses.g_fm}};
}

Trainer::Trainer(const TrainConfig& config, GanModel<float>& model, nn::Network<float>* feature_net)
    : config_(config), model_(model), objective_(model, config.weights, feature_net) {}

void Trainer::begin_phase(int index) {
  const PhaseConfig& p = config_.phases.at(static_cast<std::size_t>(index));
  phase_ = index;
  auto& g = model_.generator;
  std::vector<nn::Parameter<float>*> g_params, d_params;
  scales_.clear();
  switch (p.kind) {
    case PhaseKind::global:
      g.set_mode(GeneratorMode::global_only);
      g.freeze_g1(false);
      g.freeze_g2(true);
      g_params = g.g1_parameters();
      for (int k = 0; k < model_.discriminator.num_scales(); ++k) scales_.push_back(k);
      d_params = model_.discriminator_parameters();
      break;
    case PhaseKind::enhancer:
      g.set_mode(GeneratorMode::composed);
      g.freeze_g1(true);
      g.freeze_g2(false);
      g_params = g.g2_parameters();
      scales_ = {0};
      d_params = model_.discriminator.parameters(0);
      break;
    case PhaseKind::joint:
      g.set_mode(GeneratorMode::composed);
      g.freeze_g1(false);
      g.freeze_g2(false);
      g_params = g.parameters();
      for (int k = 0; k < model_.discriminator.num_scales(); ++k) scales_.push_back(k);
      d_params = model_.discriminator_parameters();
      break;
  }
  for (auto* e : model_.encoder_parameters()) g_params.push_back(e);
  g_opt_ = std::make_unique<nn::Adam<float>>(g_params, config_.beta1, config_.beta2);
  d_opt_ = std::make_unique<nn::Adam<float>>(d_params, config_.beta1, config_.beta2);
}

LossReport Trainer::train_step(const std::vector<const SamplePair*>& batch, double lr) {
  if (phase_ < 0) throw Error("train_step before begin_phase");
  const PhaseConfig& p = config_.phases[static_cast<std::size_t>(phase_)];
  std::vector<const LabelMap*> labels;
  std::vector<const InstanceMap*> instances;
  std::vector<const Tensor<float>*> images;
  for (const auto* s : batch) {
    labels.push_back(&s->label);
    instances.push_back(&s->instance);
    images.push_back(&s->image);
  }
  const auto in = make_step_input<float>(labels, instances, images, p.half_resolution, p.kind != PhaseKind::global,
                                         model_.spec.use_instance_maps);
  typename GanObjective<float>::State state;
  LossReport report;
  objective_.forward_generator(in, state);
  objective_.d_step(in, state, scales_, report);
  d_opt_->step(lr);
  objective_.g_step(in, state, scales_, report);
  g_opt_->step(lr);
  return report;
}

namespace {

void append_moments(Bundle& b, const std::string& tag, const nn::Adam<float>& opt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    b.arrays.push_back({tag + "/m/" + params[i]->name, params[i]->shape, opt.first_moments()[i]});
    b.arrays.push_back({tag + "/v/" + params[i]->name, params[i]->shape, opt.second_moments()[i]});
  }
  b.manifest[tag + "_steps"] = opt.steps();
}

void restore_moments(const Bundle& b, const std::string& tag, nn::Adam<float>& opt) {
  if (!b.manifest.contains(tag + "_steps")) return;
  std::vector<std::vector<float>> m, v;
  for (const auto* p : opt.params()) {
    const NamedArray* am = b.find(tag + "/m/" + p->name);
    const NamedArray* av = b.find(tag + "/v/" + p->name);
    if (!am || !av) throw IntegrityError("optimizer state for " + p->name + " missing from checkpoint");
    m.push_back(am->data);
    v.push_back(av->data);
  }
  opt.restore(b.manifest[tag + "_steps"].get<std::int64_t>(), std::move(m), std::move(v));
}

}  // namespace

void Trainer::save_optimizer_state(Bundle& bundle) const {
  if (!g_opt_) return;
  append_moments(bundle, "adam_g", *g_opt_);
  append_moments(bundle, "adam_d", *d_opt_);
}

void Trainer::restore_optimizer_state(const Bundle& bundle) {
  if (!g_opt_) throw Error("restore_optimizer_state before begin_phase");
  restore_moments(bundle, "adam_g", *g_opt_);
  restore_moments(bundle, "adam_d", *d_opt_);
}

std::unique_ptr<nn::Network<float>> load_feature_net(const TrainConfig& config) {
  if (config.perceptual_net.empty() || config.weights.lambda_perc <= 0) return nullptr;
  OracleSegmenter oracle = OracleSegmenter::load(config.perceptual_net);
  auto net = std::make_unique<nn::Network<float>>(std::move(oracle.net));
  net->set_frozen(true);
  return net;
}

RunResult run_schedule(const TrainConfig& config, const Dataset& dataset, GanModel<float>& model,
                       const RunOptions& options) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  if (!(model.spec == config.model)) throw ConfigError("model does not match the configured spec");
  config.validate(dataset.samples[0].label.height, dataset.samples[0].label.width);
  if (dataset.num_classes != config.model.num_classes)
    throw ConfigError("dataset has " + std::to_string(dataset.num_classes) + " classes, model expects " +
                      std::to_string(config.model.num_classes));

  const std::string hash = config.hash();
  auto feature_net = load_feature_net(config);
  Trainer trainer(config, model, feature_net.get());
  RunResult result;

  int start_phase = 0, start_epoch = 0;
  std::optional<Bundle> resume;
  if (!options.resume.empty()) {
    resume = load_bundle(options.resume);
    const std::string saved = resume->manifest.value("config_hash", "");
    if (saved != hash && !options.force)
      throw ConfigError("checkpoint config hash " + saved + " differs from " + hash + "; pass force to override");
    load_parameters(*resume, model);
    start_phase = resume->manifest.value("phase", 0);
    start_epoch = resume->manifest.value("next_epoch", 0);
    result.steps = resume->manifest.value("step", std::int64_t{0});
  } else {
    model.init_weights(config.seed);
  }

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    log_file.open(fs::path(options.out_dir) / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  }

  auto checkpoint = [&](int phase, int next_epoch, const std::string& name) {
    nlohmann::json extra = {{"config_hash", hash},
                            {"config", config.to_json()},
                            {"phase", phase},
                            {"next_epoch", next_epoch},
                            {"step", result.steps},
                            {"optimizer_phase", trainer.phase()},
                            {"adam_betas", {config.beta1, config.beta2}}};
    Bundle b = bundle_from_model(model, extra);
    trainer.save_optimizer_state(b);
    if (options.out_dir.empty()) return b;
    const std::string path = (fs::path(options.out_dir) / name).string();
    save_bundle(path, b);
    save_bundle((fs::path(options.out_dir) / "latest.lsb").string(), b);
    result.checkpoints.push_back(path);
    return b;
  };

  const auto num_phases = static_cast<int>(config.phases.size());
  for (int pi = start_phase; pi < num_phases; ++pi) {
    const PhaseConfig& p = config.phases[static_cast<std::size_t>(pi)];
    trainer.begin_phase(pi);
    int first_epoch = 0;
    if (resume && pi == start_phase) {
      first_epoch = start_epoch;
      if (resume->manifest.value("optimizer_phase", -1) == pi) trainer.restore_optimizer_state(*resume);
    }
    for (int epoch = first_epoch; epoch < p.epochs; ++epoch) {
      const double lr = learning_rate(config.lr, p.constant(), p.decay(), epoch);
      const std::uint64_t shuffle_seed = config.seed * 1000003ull + static_cast<std::uint64_t>(pi) * 10007ull +
                                         static_cast<std::uint64_t>(epoch);
      for (const auto& idx : iterate_batches(dataset.size(), static_cast<std::size_t>(config.batch_size), shuffle_seed)) {
        std::vector<const SamplePair*> batch;
        for (std::size_t i : idx) batch.push_back(&dataset.samples[i]);
        StepLog entry{result.steps + 1, pi, epoch, lr, {}};
        try {
          entry.losses = trainer.train_step(batch, lr);
        } catch (const NonFiniteError& e) {
          std::string where = "phase " + std::to_string(pi) + " epoch " + std::to_string(epoch) + " step " +
                              std::to_string(entry.step);
          if (!options.out_dir.empty()) {
            checkpoint(pi, epoch, "nonfinite_snapshot.lsb");
            where += "; snapshot written to " + (fs::path(options.out_dir) / "nonfinite_snapshot.lsb").string();
          }
          throw NonFiniteError(std::string(e.what()) + " at " + where);
        }
        ++result.steps;
        if (log_file) log_file << entry.to_json().dump() << '\n';
        if (options.on_step) options.on_step(entry);
        result.log.push_back(std::move(entry));
      }
      if (log_file) log_file.flush();
      const bool last = epoch + 1 == p.epochs;
      if (last || (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0)) {
        char name[64];
        std::snprintf(name, sizeof name, "ckpt_p%d_e%03d.lsb", pi, epoch + 1);
        // A phase's final checkpoint resumes at the start of the next phase.
        if (last)
          checkpoint(pi + 1, 0, name);
        else
          checkpoint(pi, epoch + 1, name);
      }
    }
  }
  model.generator.freeze_g1(false);
  model.generator.freeze_g2(false);
  return result;
}

}  // namespace labelsynth
