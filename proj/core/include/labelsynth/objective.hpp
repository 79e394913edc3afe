#pragma once

#include <vector>

#include "labelsynth/label_maps.hpp"
#include "labelsynth/losses.hpp"
#include "labelsynth/model.hpp"

namespace labelsynth {

/// One batch at the generator's output resolution, ready for a training step.
template <typename T>
struct StepInput {
  Tensor<T> cond;   // (n, h, w, C+1) one-hot + boundary
  Tensor<T> real;   // (n, h, w, 3) in [-1, 1]
  std::vector<RegionIndex> regions;
  bool composed = false;
  Tensor<T> cond_half;  // composed only: rebuilt from nearest-downsampled maps
  std::vector<RegionIndex> regions_half;

  int batch() const { return real.n(); }
};

/// Builds a StepInput from full-resolution samples. `half_resolution` trains
/// at half size (labels downsampled nearest-neighbor, boundaries recomputed,
/// images average-pooled); `composed` additionally builds the half-size G1 input.
template <typename T>
StepInput<T> make_step_input(const std::vector<const LabelMap*>& labels, const std::vector<const InstanceMap*>& instances,
                             const std::vector<const Tensor<float>*>& images, bool half_resolution, bool composed,
                             bool use_instance_maps);

/// The full objective: alternating LSGAN discriminator and generator
/// gradients with discriminator feature matching and an optional perceptual term.
template <typename T>
class GanObjective {
 public:
  struct State {
    typename Generator<T>::Trace g_trace;
    typename Encoder<T>::Trace e_trace;
    std::vector<RegionVectors<T>> style_means;  // encoder output per sample/region
    Tensor<T> fake;
    std::vector<Tensor<T>> cond_pyramid, real_pyramid;
    std::vector<std::vector<Tensor<T>>> real_features;  // per scale, recorded in the d-step
    bool has_trace = false;
  };

  GanObjective(GanModel<T>& model, LossWeights weights, nn::Network<T>* feature_net = nullptr, int feature_taps = 5);

  /// Runs E (if present) and G, keeping traces for the g-step.
  void forward_generator(const StepInput<T>& in, State& s, bool keep_trace = true) const;

  /// Zeroes discriminator gradients and fills them with d(d_total)/d(theta_D)
  /// for the given scales (zero-based). Records the real-image taps for the
  /// feature-matching term; the generator output is treated as a constant.
  void d_step(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport& report);

  /// Zeroes generator/encoder gradients and fills them with d(g_total)/d(theta).
  /// Discriminator parameters receive no gradient.
  void g_step(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport& report);

  /// Records real-image taps without touching any gradient.
  void record_real_features(const StepInput<T>& in, State& s, const std::vector<int>& scales) const;

  /// g_total evaluated forward-only, with real taps from the current discriminator.
  double g_objective(const StepInput<T>& in, const std::vector<int>& scales);

  const LossWeights& weights() const { return weights_; }
  void set_weights(const LossWeights& w) { weights_ = w; }

 private:
  Tensor<T> generator_input(const Tensor<T>& cond, const std::vector<RegionIndex>& regions,
                            const std::vector<RegionVectors<T>>& means, const std::vector<RegionIndex>& top) const;
  void build_pyramids(const StepInput<T>& in, State& s, int levels) const;
  double g_loss(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport* report,
                bool with_grad);

  GanModel<T>& model_;
  LossWeights weights_;
  nn::Network<T>* feature_net_;
  int feature_taps_;
};

}  // namespace labelsynth
