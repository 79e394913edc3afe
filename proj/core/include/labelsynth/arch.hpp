#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace labelsynth {

enum class LayerKind { conv, down_conv, residual_block, up_conv, patch_conv, final_conv };
enum class Norm { instance, none };
enum class Activation { relu, leaky_relu, tanh, none };
enum class PaddingMode { reflect, zero };

/// Stride as a ratio: 1/1, 2/1, or 1/2 (fractional-strided).
struct Stride {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
  bool operator==(const Stride&) const = default;
};

inline constexpr float kLeakySlope = 0.2f;

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int filters = 1;
  int kernel = 3;
  Stride stride;
  int padding = 0;
  Norm norm = Norm::instance;
  Activation activation = Activation::relu;
  PaddingMode padding_mode = PaddingMode::zero;
  /// Layers appended by the notation itself (the discriminator's 1-plane head)
  /// are not printed back.
  bool implicit = false;

  bool operator==(const LayerSpec&) const = default;
};

enum class Notation { generator, discriminator };

/// A sequential stack with at most one fusion point, where an external
/// feature map of equal shape is added to the output of layer `fusion_point`.
struct LayerGraph {
  std::vector<LayerSpec> layers;
  std::optional<std::size_t> fusion_point;
  Notation notation = Notation::generator;
  int input_planes = 0;

  int output_planes() const { return layers.empty() ? input_planes : layers.back().filters; }
  bool operator==(const LayerGraph&) const = default;
};

/// Parses the compact architecture notation.
///
/// Generator strings are comma separated:
///   c<K>s<S>-<N>  KxK conv, stride S, reflect padding, InstanceNorm, ReLU
///   d<N>          3x3 stride-2 conv, InstanceNorm, ReLU
///   R<N>          residual block of two 3x3 convs with N filters
///   u<N>          3x3 stride-1/2 transposed conv, InstanceNorm, ReLU
///   h<K>-<N>      linear KxK head (no norm, no activation)
/// The last `c` token is the image head: tanh, no norm. A `+` suffix marks the
/// fusion point. Discriminator strings are dash separated `C<N>` tokens: 4x4
/// stride-2 conv, InstanceNorm (none on the first), LeakyReLU(0.2); the last
/// block uses stride 1 and a linear 4x4 one-plane head is appended, giving the
/// 70x70 PatchGAN for the four-block string.
LayerGraph parse_arch(std::string_view spec);

/// Inverse of parse_arch.
std::string print_arch(const LayerGraph& graph);

/// Divides every filter count by `divisor` (min 1), leaving output heads alone.
LayerGraph scale_width(const LayerGraph& graph, int divisor);

struct LayerShape {
  int planes = 0;
  int height = 0;
  int width = 0;
  bool operator==(const LayerShape&) const = default;
};

/// Output shape of every layer. Throws ShapeError naming the offending layer
/// when a stride-2 layer receives odd dims or a residual block changes planes.
std::vector<LayerShape> infer_shapes(const LayerGraph& graph, int input_h, int input_w, int input_planes);

/// Receptive field, in input pixels, of one unit of the final layer.
int receptive_field(const LayerGraph& graph);

/// Weight + bias count of one layer given its input planes.
std::int64_t layer_param_count(const LayerSpec& layer, int input_planes);
std::int64_t param_count(const LayerGraph& graph, int input_planes);

/// Human-readable token for one layer ("c7s1-64", "R256", "<head 1>").
std::string layer_token(const LayerSpec& layer, bool is_first_c = false);

/// Number of residual blocks in the graph.
int count_kind(const LayerGraph& graph, LayerKind kind);

}  // namespace labelsynth
