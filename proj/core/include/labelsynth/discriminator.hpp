#pragma once

#include <string>
#include <vector>

#include "labelsynth/nn.hpp"

namespace labelsynth {

inline constexpr const char* kPatchDiscriminatorArch = "C64-C128-C256-C512";

struct DiscriminatorSpec {
  std::string arch = kPatchDiscriminatorArch;
  int width_divisor = 4;
  int cond_planes = 0;  // one-hot + boundary
  int num_scales = 3;
};

/// Score map plus every tapped block output (C-blocks and the head).
template <typename T>
struct DiscriminatorOutput {
  Tensor<T> score_map;
  std::vector<Tensor<T>> features;
};

/// Identical PatchGAN discriminators, one per pyramid level.
template <typename T>
class MultiScaleDiscriminator {
 public:
  using Trace = typename nn::Network<T>::Trace;

  explicit MultiScaleDiscriminator(const DiscriminatorSpec& spec);

  /// Scale index k is zero-based here (0 = full resolution).
  DiscriminatorOutput<T> forward(int k, const Tensor<T>& cond, const Tensor<T>& image, Trace* trace = nullptr) const;
  /// One output per level; `levels` must match num_scales.
  std::vector<DiscriminatorOutput<T>> multiscale_forward(const std::vector<Tensor<T>>& cond_pyramid,
                                                         const std::vector<Tensor<T>>& image_pyramid) const;

  /// Backpropagates gradients at the score map and the taps (either may be
  /// empty). Returns d(image) when `image_grad` is set.
  Tensor<T> backward(int k, const Trace& trace, const Tensor<T>& d_score, std::span<const Tensor<T>> d_features,
                     bool param_grads, bool image_grad);

  int num_scales() const { return static_cast<int>(nets_.size()); }
  int tap_count() const { return static_cast<int>(graph_.layers.size()); }
  const LayerGraph& graph() const { return graph_; }
  const DiscriminatorSpec& spec() const { return spec_; }
  nn::Network<T>& net(int k) { return nets_.at(static_cast<std::size_t>(k)); }
  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Parameter<T>*> parameters(int k) { return nets_.at(static_cast<std::size_t>(k)).parameters(); }

 private:
  DiscriminatorSpec spec_;
  LayerGraph graph_;
  std::vector<nn::Network<T>> nets_;
};

}  // namespace labelsynth
