#pragma once

#include <optional>
#include <string>

#include "labelsynth/arch.hpp"
#include "labelsynth/nn.hpp"

namespace labelsynth {

inline constexpr const char* kGlobalGeneratorArch =
    "c7s1-64,d128,d256,d512,d1024,R1024,R1024,R1024,R1024,R1024,R1024,R1024,R1024,R1024,u512,u256,u128,u64,c7s1-3";
inline constexpr const char* kLocalEnhancerArch = "c7s1-32,d64,R64,R64,R64,u32,c7s1-3";

enum class GeneratorMode { global_only, composed };

/// The global network G1. The image head (final layer) is split from the body
/// so the body's last feature map can feed the enhancer.
template <typename T>
class GlobalGenerator {
 public:
  struct Trace {
    typename nn::Network<T>::Trace body, head;
  };
  struct Output {
    Tensor<T> image;
    Tensor<T> last_feature;
  };

  GlobalGenerator(const LayerGraph& graph, int input_planes);

  /// `with_head` false skips the image head (composed mode only needs the feature).
  Output forward(const Tensor<T>& cond, Trace* trace = nullptr, bool with_head = true) const;
  /// Gradients at the image and/or at the last feature; returns d(cond) when requested.
  Tensor<T> backward(const Trace& trace, const Tensor<T>& d_image, const Tensor<T>& d_feature,
                     bool input_grad);

  const LayerGraph& graph() const { return graph_; }
  std::vector<nn::Parameter<T>*> parameters();
  void set_frozen(bool f) {
    body_.set_frozen(f);
    head_.set_frozen(f);
  }
  bool frozen() const { return body_.frozen(); }
  int feature_planes() const { return body_.output_planes(); }

 private:
  LayerGraph graph_;
  nn::Network<T> body_, head_;
};

/// The local enhancer G2: front end, fusion by element-wise sum, then
/// residual blocks and back end.
template <typename T>
class LocalEnhancer {
 public:
  struct Trace {
    typename nn::Network<T>::Trace front, back;
  };

  /// Without an explicit `+` marker the fusion point is the last stride-2 layer.
  LocalEnhancer(const LayerGraph& graph, int input_planes);

  Tensor<T> front(const Tensor<T>& cond, Trace* trace) const;
  Tensor<T> back(const Tensor<T>& fused, Trace* trace) const;
  /// Returns d(fused) from d(image).
  Tensor<T> backward_back(const Trace& trace, const Tensor<T>& d_image);
  Tensor<T> backward_front(const Trace& trace, const Tensor<T>& d_front, bool input_grad);

  const LayerGraph& graph() const { return graph_; }
  std::size_t fusion_point() const { return *graph_.fusion_point; }
  int front_planes() const { return front_.output_planes(); }
  std::vector<nn::Parameter<T>*> parameters();
  void set_frozen(bool f) {
    front_.set_frozen(f);
    back_.set_frozen(f);
  }
  bool frozen() const { return front_.frozen(); }

 private:
  LayerGraph graph_;
  nn::Network<T> front_, back_;
};

struct GeneratorSpec {
  std::string global_arch = kGlobalGeneratorArch;
  std::string enhancer_arch = kLocalEnhancerArch;
  int width_divisor = 4;
  int input_planes = 0;
  bool with_enhancer = true;
};

/// G = {G1, G2}. In composed mode G1 runs on the half-resolution conditioning
/// and its last feature map is added to the G2 front-end output.
template <typename T>
class Generator {
 public:
  struct Trace {
    typename GlobalGenerator<T>::Trace g1;
    typename LocalEnhancer<T>::Trace g2;
    GeneratorMode mode = GeneratorMode::global_only;
  };
  struct InputGrads {
    Tensor<T> full;  // composed: d(cond_full); global: d(cond)
    Tensor<T> half;  // composed only
  };

  explicit Generator(const GeneratorSpec& spec);

  /// G1 alone on `cond`; returns the image.
  Tensor<T> forward_global(const Tensor<T>& cond, Trace* trace = nullptr) const;
  /// Full pipeline. Throws ShapeError unless cond_half dims are exactly half.
  Tensor<T> forward_composed(const Tensor<T>& cond_full, const Tensor<T>& cond_half, Trace* trace = nullptr) const;
  /// Same as forward_composed, with the G2 front-end replaced by zeros when
  /// `zero_front` is set (used to probe the fusion).
  Tensor<T> forward_composed_probe(const Tensor<T>& cond_full, const Tensor<T>& cond_half, bool zero_front,
                                   Tensor<T>* fused_out = nullptr) const;

  InputGrads backward(const Trace& trace, const Tensor<T>& d_image, bool input_grads);

  void set_mode(GeneratorMode m);
  GeneratorMode mode() const { return mode_; }
  bool has_enhancer() const { return g2_.has_value(); }

  void freeze_g1(bool f) { g1_.set_frozen(f); }
  /// No-op when the enhancer does not exist.
  void freeze_g2(bool f) {
    if (g2_) g2_->set_frozen(f);
  }

  GlobalGenerator<T>& g1() { return g1_; }
  const GlobalGenerator<T>& g1() const { return g1_; }
  LocalEnhancer<T>& g2() { return *g2_; }
  const LocalEnhancer<T>& g2() const { return *g2_; }
  const GeneratorSpec& spec() const { return spec_; }

  std::vector<nn::Parameter<T>*> g1_parameters() { return g1_.parameters(); }
  std::vector<nn::Parameter<T>*> g2_parameters() { return g2_ ? g2_->parameters() : std::vector<nn::Parameter<T>*>{}; }
  std::vector<nn::Parameter<T>*> parameters();

  /// Receptive field (in full-resolution pixels) of one output pixel.
  int receptive_field() const;

 private:
  GeneratorSpec spec_;
  GlobalGenerator<T> g1_;
  std::optional<LocalEnhancer<T>> g2_;
  GeneratorMode mode_ = GeneratorMode::global_only;
};

}  // namespace labelsynth
