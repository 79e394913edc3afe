#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/discriminator.hpp"
#include "labelsynth/encoder.hpp"
#include "labelsynth/generator.hpp"

namespace labelsynth {

/// Everything needed to rebuild a model's networks.
struct ModelSpec {
  int num_classes = 4;
  bool use_instance_maps = true;
  bool use_encoder = false;
  bool with_enhancer = true;
  int width_divisor = 4;
  int num_d_scales = 3;
  std::string global_arch = kGlobalGeneratorArch;
  std::string enhancer_arch = kLocalEnhancerArch;
  std::string discriminator_arch = kPatchDiscriminatorArch;
  std::string encoder_arch = kEncoderArch;

  /// One-hot + boundary planes.
  int cond_planes() const { return num_classes + 1; }
  int generator_input_planes() const { return cond_planes() + (use_encoder ? 3 : 0); }

  GeneratorSpec generator_spec() const;
  DiscriminatorSpec discriminator_spec() const;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
  bool operator==(const ModelSpec&) const = default;
};

/// G = {G1, G2}, the discriminator set, and the optional style encoder.
template <typename T>
struct GanModel {
  ModelSpec spec;
  Generator<T> generator;
  MultiScaleDiscriminator<T> discriminator;
  std::optional<Encoder<T>> encoder;

  explicit GanModel(const ModelSpec& s);

  /// Generator-side parameters: g1, g2, and encoder.
  std::vector<nn::Parameter<T>*> generator_parameters();
  std::vector<nn::Parameter<T>*> discriminator_parameters() { return discriminator.parameters(); }
  std::vector<nn::Parameter<T>*> encoder_parameters();
  /// Every parameter in checkpoint order.
  std::vector<nn::Parameter<T>*> all_parameters();

  /// N(0, 0.02^2) conv weights and zero biases, deterministic under `seed`.
  void init_weights(std::uint64_t seed, double stddev = 0.02);
};

}  // namespace labelsynth
