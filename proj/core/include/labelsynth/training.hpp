#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/bundle.hpp"
#include "labelsynth/dataset.hpp"
#include "labelsynth/objective.hpp"

namespace labelsynth {

/// global: G1 + every discriminator. enhancer: G2 + finest discriminator, G1
/// frozen. joint: everything.
enum class PhaseKind { global, enhancer, joint };

PhaseKind phase_kind_from_string(const std::string& s);
std::string to_string(PhaseKind k);

struct PhaseConfig {
  PhaseKind kind = PhaseKind::global;
  int epochs = 1;
  /// Epochs at the base rate before linear decay; negative means epochs / 2.
  int constant_epochs = -1;
  /// Train on 2x-downsampled samples (the coarse G1 stage of a composed model).
  bool half_resolution = false;

  int constant() const { return constant_epochs < 0 ? epochs / 2 : constant_epochs; }
  int decay() const { return epochs - constant(); }
};

struct TrainConfig {
  ModelSpec model;
  LossWeights weights;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::vector<PhaseConfig> phases;
  int checkpoint_every = 0;     // epochs; 0 = phase boundaries only
  std::string perceptual_net;   // oracle bundle path; empty disables the term

  /// Three-phase desk-scale schedule for a composed model.
  static TrainConfig desk_default(int global_epochs = 8, int enhancer_epochs = 2, int joint_epochs = 2);

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::string& path);
  /// Hex digest of every setting that affects the trained weights.
  std::string hash() const;
  /// Throws ConfigError on inconsistent settings or sample dims.
  void validate(int sample_height, int sample_width) const;
};

/// Constant for `constant_epochs`, then linear toward zero over
/// `decay_epochs`; zero beyond the schedule. `epoch` is zero-based.
double learning_rate(double base, int constant_epochs, int decay_epochs, int epoch);

struct StepLog {
  std::int64_t step = 0;
  int phase = 0;
  int epoch = 0;
  double lr = 0;
  LossReport losses;

  nlohmann::json to_json() const;
};

/// Owns the optimizers and performs alternating D/G updates on one model.
class Trainer {
 public:
  Trainer(const TrainConfig& config, GanModel<float>& model, nn::Network<float>* feature_net = nullptr);

  /// Sets generator mode, freeze flags, active scales, and fresh optimizers.
  void begin_phase(int index);
  int phase() const { return phase_; }
  const std::vector<int>& active_scales() const { return scales_; }

  /// One discriminator update followed by one generator (+encoder) update.
  LossReport train_step(const std::vector<const SamplePair*>& batch, double lr);

  /// Appends optimizer moments to `bundle` and restores them.
  void save_optimizer_state(Bundle& bundle) const;
  void restore_optimizer_state(const Bundle& bundle);

  GanObjective<float>& objective() { return objective_; }

 private:
  const TrainConfig& config_;
  GanModel<float>& model_;
  GanObjective<float> objective_;
  int phase_ = -1;
  std::vector<int> scales_;
  std::unique_ptr<nn::Adam<float>> g_opt_, d_opt_;
};

struct RunOptions {
  std::string out_dir;  // checkpoints + train_log.jsonl; empty keeps everything in memory
  std::string resume;   // bundle to continue from
  bool force = false;   // resume even if the config hash differs
  std::function<void(const StepLog&)> on_step;
};

struct RunResult {
  std::int64_t steps = 0;
  std::vector<std::string> checkpoints;
  std::vector<StepLog> log;
};

/// Initializes (unless resuming) and trains `model` through every phase.
RunResult run_schedule(const TrainConfig& config, const Dataset& dataset, GanModel<float>& model,
                       const RunOptions& options = {});

/// Loads the frozen perceptual feature network named by `config`, if any.
std::unique_ptr<nn::Network<float>> load_feature_net(const TrainConfig& config);

}  // namespace labelsynth
