#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "labelsynth/tensor.hpp"

namespace labelsynth {

/// Per-pixel semantic class IDs in [0, num_classes).
struct LabelMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<int32_t> grid;

  LabelMap() = default;
  LabelMap(int h, int w, int classes, int32_t fill = 0)
      : height(h), width(w), num_classes(classes), grid(static_cast<std::size_t>(h) * w, fill) {}

  int32_t& at(int y, int x) { return grid[static_cast<std::size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return grid.size(); }

  /// Throws InvalidLabelError on out-of-range IDs, ShapeError on bad dims.
  void validate() const;
  bool operator==(const LabelMap&) const = default;
};

/// Per-pixel object IDs; 0 marks "stuff" pixels that belong to no object.
struct InstanceMap {
  int height = 0;
  int width = 0;
  std::vector<int32_t> grid;

  InstanceMap() = default;
  InstanceMap(int h, int w, int32_t fill = 0) : height(h), width(w), grid(static_cast<std::size_t>(h) * w, fill) {}

  int32_t& at(int y, int x) { return grid[static_cast<std::size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return grid.size(); }
  bool operator==(const InstanceMap&) const = default;
};

struct BoundaryMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> grid;

  uint8_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const BoundaryMap&) const = default;
};

/// Checks the pair contract: equal dims, valid classes, and a single class
/// under every nonzero instance ID.
void validate_pair(const LabelMap& label, const InstanceMap& instance);

/// Marks pixels whose instance ID differs from any in-bounds 4-neighbor.
BoundaryMap compute_boundary_map(const InstanceMap& instance);

/// C one-hot planes, shape (1, h, w, C).
Tensor<float> encode_one_hot(const LabelMap& label);

/// Nearest-neighbor 2x downsampling (keeps the top-left pixel of each block).
LabelMap downsample_nearest(const LabelMap& label);
InstanceMap downsample_nearest(const InstanceMap& instance);

/// A style region: one instance of one class. Stuff pixels (instance 0) form
/// one region per class, so every region has a single class.
struct RegionKey {
  int32_t class_id = 0;
  int32_t instance_id = 0;
  auto operator<=>(const RegionKey&) const = default;
};

using StyleVector = std::array<float, 3>;
using StyleVectors = std::map<RegionKey, StyleVector>;

/// Dense region labelling of a label/instance pair.
struct RegionIndex {
  std::vector<RegionKey> keys;        // region id -> key, sorted by key
  std::vector<int> pixel_counts;      // region id -> pixel count
  std::vector<int> region_of_pixel;   // row-major pixel -> region id
  int height = 0;
  int width = 0;

  static RegionIndex build(const LabelMap& label, const InstanceMap& instance);
  int find(const RegionKey& key) const;  // -1 when absent
};

/// One-hot label planes, a boundary plane, and optionally 3 feature planes.
struct ConditioningTensor {
  Tensor<float> planes;  // (1, h, w, C + 1 [+ 3])
  int num_classes = 0;
  int feature_planes = 0;

  int height() const { return planes.h(); }
  int width() const { return planes.w(); }
  int plane_count() const { return planes.c(); }
};

/// one-hot || boundary || broadcast features. Throws IncompleteStyleError when
/// `features` is given but misses a region present in the maps. `use_boundary`
/// false zeroes the boundary plane (the no-instance-map variant).
ConditioningTensor build_conditioning(const LabelMap& label, const InstanceMap& instance,
                                      const StyleVectors* features = nullptr, bool use_boundary = true);

/// Writes each region's vector to all of its pixels; shape (1, h, w, 3).
Tensor<float> broadcast_features(const RegionIndex& regions, const StyleVectors& features);

/// Full, 1/2, and 1/4 resolution levels built by 2x2 average pooling.
template <typename T>
struct ImagePyramid {
  std::vector<Tensor<T>> levels;
};

template <typename T>
ImagePyramid<T> build_pyramid(const Tensor<T>& image, int levels = 3) {
  const int factor = 1 << (levels - 1);
  if (image.h() % factor != 0 || image.w() % factor != 0)
    throw ShapeError("build_pyramid: dims " + std::to_string(image.h()) + "x" + std::to_string(image.w()) +
                     " not divisible by " + std::to_string(factor));
  ImagePyramid<T> p;
  p.levels.push_back(image);
  for (int k = 1; k < levels; ++k) p.levels.push_back(avg_pool2(p.levels.back()));
  return p;
}

}  // namespace labelsynth
