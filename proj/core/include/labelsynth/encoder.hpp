#pragma once

#include <array>
#include <string>
#include <vector>

#include "labelsynth/label_maps.hpp"
#include "labelsynth/nn.hpp"

namespace labelsynth {

inline constexpr const char* kEncoderArch = "c7s1-16,d32,d64,u32,u16,c7s1-3";

template <typename T>
using RegionVectors = std::vector<std::array<T, 3>>;  // indexed by RegionIndex region id

/// Mean of a 3-plane map over each region.
template <typename T>
RegionVectors<T> region_means(const T* planes, const RegionIndex& regions);

/// Sum of a 3-plane slice (planes [offset, offset+3) of a `stride`-plane map) over each region.
template <typename T>
RegionVectors<T> region_sums(const T* planes, int stride, int offset, const RegionIndex& regions);

/// Mean over each region, written back to every pixel of the region. Because
/// the operator is an orthogonal projection it is its own adjoint, so the same
/// call also computes the backward pass.
template <typename T>
Tensor<T> instance_average_pool(const Tensor<T>& raw, const std::vector<RegionIndex>& regions);

/// Encoder-decoder E whose 3-plane output is pooled per instance region.
template <typename T>
class Encoder {
 public:
  using Trace = typename nn::Network<T>::Trace;

  explicit Encoder(const std::string& arch = kEncoderArch);

  /// Raw (unpooled) encoder output, shape (n, h, w, 3).
  Tensor<T> raw(const Tensor<T>& image, Trace* trace = nullptr) const;
  /// Per-sample, per-region means of the raw output.
  std::vector<RegionVectors<T>> encode_regions(const Tensor<T>& image, const std::vector<RegionIndex>& regions,
                                               Trace* trace = nullptr) const;
  /// Pooled feature map (piecewise constant per region).
  Tensor<T> encode_pooled(const Tensor<T>& image, const std::vector<RegionIndex>& regions) const;
  /// Backward from gradients w.r.t. the per-region means.
  void backward(const Trace& trace, const std::vector<RegionVectors<T>>& d_means,
                const std::vector<RegionIndex>& regions);

  const LayerGraph& graph() const { return graph_; }
  std::vector<nn::Parameter<T>*> parameters() { return net_.parameters(); }
  void set_frozen(bool f) { net_.set_frozen(f); }
  bool frozen() const { return net_.frozen(); }

 private:
  LayerGraph graph_;
  nn::Network<T> net_;
};

/// One harvested style vector.
struct InstanceFeature {
  std::string sample_id;
  int32_t instance_id = 0;
  int32_t class_id = 0;
  StyleVector vector{};
  int pixels = 0;
};

}  // namespace labelsynth
