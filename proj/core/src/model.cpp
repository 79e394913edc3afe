#include "labelsynth/model.hpp"

#include "labelsynth/error.hpp"

namespace labelsynth {

GeneratorSpec ModelSpec::generator_spec() const {
  GeneratorSpec g;
  g.global_arch = global_arch;
  g.enhancer_arch = enhancer_arch;
  g.width_divisor = width_divisor;
  g.input_planes = generator_input_planes();
  g.with_enhancer = with_enhancer;
  return g;
}

DiscriminatorSpec ModelSpec::discriminator_spec() const {
  DiscriminatorSpec d;
  d.arch = discriminator_arch;
  d.width_divisor = width_divisor;
  d.cond_planes = cond_planes();
  d.num_scales = num_d_scales;
  return d;
}

nlohmann::json ModelSpec::to_json() const {
  return {{"num_classes", num_classes},
          {"use_instance_maps", use_instance_maps},
          {"use_encoder", use_encoder},
          {"with_enhancer", with_enhancer},
          {"width_divisor", width_divisor},
          {"num_d_scales", num_d_scales},
          {"global_arch", global_arch},
          {"enhancer_arch", enhancer_arch},
          {"discriminator_arch", discriminator_arch},
          {"encoder_arch", encoder_arch}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.use_instance_maps = j.value("use_instance_maps", s.use_instance_maps);
    s.use_encoder = j.value("use_encoder", s.use_encoder);
    s.with_enhancer = j.value("with_enhancer", s.with_enhancer);
    s.width_divisor = j.value("width_divisor", s.width_divisor);
    s.num_d_scales = j.value("num_d_scales", s.num_d_scales);
    s.global_arch = j.value("global_arch", s.global_arch);
    s.enhancer_arch = j.value("enhancer_arch", s.enhancer_arch);
    s.discriminator_arch = j.value("discriminator_arch", s.discriminator_arch);
    s.encoder_arch = j.value("encoder_arch", s.encoder_arch);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
  if (s.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (s.num_d_scales < 1 || s.num_d_scales > 3) throw ConfigError("num_d_scales must be 1..3");
  return s;
}

template <typename T>
GanModel<T>::GanModel(const ModelSpec& s)
    : spec(s), generator(s.generator_spec()), discriminator(s.discriminator_spec()) {
  if (s.use_encoder) encoder.emplace(s.encoder_arch);
}

template <typename T>
std::vector<nn::Parameter<T>*> GanModel<T>::encoder_parameters() {
  return encoder ? encoder->parameters() : std::vector<nn::Parameter<T>*>{};
}

template <typename T>
std::vector<nn::Parameter<T>*> GanModel<T>::generator_parameters() {
  auto p = generator.parameters();
  auto e = encoder_parameters();
  p.insert(p.end(), e.begin(), e.end());
  return p;
}

template <typename T>
std::vector<nn::Parameter<T>*> GanModel<T>::all_parameters() {
  auto p = generator_parameters();
  auto d = discriminator_parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

template <typename T>
void GanModel<T>::init_weights(std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  auto p = all_parameters();
  nn::init_normal<T>(p, rng, stddev);
}

template struct GanModel<float>;
template struct GanModel<double>;

}  // namespace labelsynth
