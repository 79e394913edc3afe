#include "labelsynth/synthesis.hpp"

namespace labelsynth {

std::pair<Tensor<float>, Tensor<float>> generator_inputs(const GanModel<float>& model, const LabelMap& label,
                                                         const InstanceMap& instance, const StyleVectors* styles) {
  if (label.num_classes != model.spec.num_classes)
    throw InvalidLabelError("label map declares " + std::to_string(label.num_classes) + " classes, model has " +
                            std::to_string(model.spec.num_classes));
  if (model.spec.use_encoder && !styles) throw IncompleteStyleError("model needs per-region style vectors");
  const StyleVectors* f = model.spec.use_encoder ? styles : nullptr;
  const bool boundary = model.spec.use_instance_maps;
  Tensor<float> full = build_conditioning(label, instance, f, boundary).planes;
  Tensor<float> half;
  if (model.spec.with_enhancer)
    half = build_conditioning(downsample_nearest(label), downsample_nearest(instance), f, boundary).planes;
  return {std::move(full), std::move(half)};
}

Tensor<float> synthesize(const GanModel<float>& model, const LabelMap& label, const InstanceMap& instance,
                         const StyleVectors* styles) {
  const auto [full, half] = generator_inputs(model, label, instance, styles);
  if (model.spec.with_enhancer) return model.generator.forward_composed(full, half);
  return model.generator.forward_global(full);
}

StyleVectors encode_styles(const GanModel<float>& model, const SamplePair& sample) {
  if (!model.encoder) throw Error("model has no style encoder");
  const RegionIndex regions = RegionIndex::build(sample.label, sample.instance);
  const auto means = model.encoder->encode_regions(sample.image, {regions});
  StyleVectors out;
  for (std::size_t r = 0; r < regions.keys.size(); ++r)
    out[regions.keys[r]] = {means[0][r][0], means[0][r][1], means[0][r][2]};
  return out;
}

std::vector<InstanceFeature> harvest_features(const GanModel<float>& model, const Dataset& dataset) {
  std::vector<InstanceFeature> out;
  for (const auto& s : dataset.samples) {
    const RegionIndex regions = RegionIndex::build(s.label, s.instance);
    const StyleVectors styles = encode_styles(model, s);
    for (std::size_t r = 0; r < regions.keys.size(); ++r) {
      const RegionKey& key = regions.keys[r];
      out.push_back({s.id, key.instance_id, key.class_id, styles.at(key), regions.pixel_counts[r]});
    }
  }
  return out;
}

}  // namespace labelsynth
