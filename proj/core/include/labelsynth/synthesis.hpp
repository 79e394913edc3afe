#pragma once

#include <vector>

#include "labelsynth/dataset.hpp"
#include "labelsynth/model.hpp"

namespace labelsynth {

/// Inference: conditioning from the maps (plus per-region styles when the
/// model has an encoder), then G at the maps' resolution. Composed models
/// derive G1's half-size input by nearest-neighbor downsampling.
/// Returns (1, h, w, 3) in [-1, 1]. Safe to call concurrently.
Tensor<float> synthesize(const GanModel<float>& model, const LabelMap& label, const InstanceMap& instance,
                         const StyleVectors* styles = nullptr);

/// The model's conditioning tensor(s) for one sample: full size, and half size
/// when composed (empty otherwise).
std::pair<Tensor<float>, Tensor<float>> generator_inputs(const GanModel<float>& model, const LabelMap& label,
                                                         const InstanceMap& instance, const StyleVectors* styles);

/// Encoder means of every (class, instance) region of a real sample.
StyleVectors encode_styles(const GanModel<float>& model, const SamplePair& sample);

/// One record per region per sample, in dataset order. Stuff regions appear
/// with instance ID 0. Requires an encoder.
std::vector<InstanceFeature> harvest_features(const GanModel<float>& model, const Dataset& dataset);

}  // namespace labelsynth
