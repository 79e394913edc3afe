#include "labelsynth/label_maps.hpp"

#include <algorithm>
#include <string>

namespace labelsynth {

void LabelMap::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("label map has empty dims");
  if (grid.size() != static_cast<std::size_t>(height) * width) throw ShapeError("label grid size mismatch");
  if (num_classes < 2) throw InvalidLabelError("num_classes must be >= 2");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] < 0 || grid[i] >= num_classes)
      throw InvalidLabelError("class ID " + std::to_string(grid[i]) + " at pixel " + std::to_string(i) +
                              " outside [0," + std::to_string(num_classes) + ")");
}

void validate_pair(const LabelMap& label, const InstanceMap& instance) {
  label.validate();
  if (instance.height != label.height || instance.width != label.width ||
      instance.grid.size() != label.grid.size())
    throw ShapeError("instance map " + std::to_string(instance.height) + "x" + std::to_string(instance.width) +
                     " vs label map " + std::to_string(label.height) + "x" + std::to_string(label.width));
  std::map<int32_t, int32_t> class_of;
  for (std::size_t i = 0; i < label.grid.size(); ++i) {
    const int32_t id = instance.grid[i];
    if (id < 0) throw ShapeError("negative instance ID at pixel " + std::to_string(i));
    if (id == 0) continue;
    auto [it, inserted] = class_of.emplace(id, label.grid[i]);
    if (!inserted && it->second != label.grid[i])
      throw InvalidLabelError("instance " + std::to_string(id) + " spans classes " + std::to_string(it->second) +
                              " and " + std::to_string(label.grid[i]));
  }
}

BoundaryMap compute_boundary_map(const InstanceMap& instance) {
  BoundaryMap b{instance.height, instance.width, std::vector<uint8_t>(instance.grid.size(), 0)};
  const int h = instance.height, w = instance.width;
  for (int y = 0; y < h; ++y) {
    const int32_t* row = instance.grid.data() + static_cast<std::size_t>(y) * w;
    uint8_t* out = b.grid.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x + 1 < w; ++x)
      if (row[x] != row[x + 1]) out[x] = out[x + 1] = 1;
    if (y + 1 < h) {
      const int32_t* below = row + w;
      uint8_t* out_below = out + w;
      for (int x = 0; x < w; ++x)
        if (row[x] != below[x]) out[x] = out_below[x] = 1;
    }
  }
  return b;
}

Tensor<float> encode_one_hot(const LabelMap& label) {
  label.validate();
  Tensor<float> t(1, label.height, label.width, label.num_classes);
  for (std::size_t i = 0; i < label.grid.size(); ++i) t[i * label.num_classes + label.grid[i]] = 1.0f;
  return t;
}

namespace {

template <typename Map>
void downsample_grid(const Map& in, Map& out) {
  if (in.height % 2 != 0 || in.width % 2 != 0)
    throw ShapeError("nearest downsampling needs even dims, got " + std::to_string(in.height) + "x" +
                     std::to_string(in.width));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = in.at(2 * y, 2 * x);
}

}  // namespace

LabelMap downsample_nearest(const LabelMap& label) {
  LabelMap out(label.height / 2, label.width / 2, label.num_classes);
  downsample_grid(label, out);
  return out;
}

InstanceMap downsample_nearest(const InstanceMap& instance) {
  InstanceMap out(instance.height / 2, instance.width / 2);
  downsample_grid(instance, out);
  return out;
}

RegionIndex RegionIndex::build(const LabelMap& label, const InstanceMap& instance) {
  if (label.grid.size() != instance.grid.size()) throw ShapeError("region index: label/instance size mismatch");
  RegionIndex r;
  r.height = label.height;
  r.width = label.width;
  std::map<RegionKey, int> ids;
  for (std::size_t i = 0; i < label.grid.size(); ++i) ids.emplace(RegionKey{label.grid[i], instance.grid[i]}, 0);
  int next = 0;
  for (auto& [key, id] : ids) {
    id = next++;
    r.keys.push_back(key);
  }
  r.pixel_counts.assign(r.keys.size(), 0);
  r.region_of_pixel.resize(label.grid.size());
  for (std::size_t i = 0; i < label.grid.size(); ++i) {
    const int id = ids.at(RegionKey{label.grid[i], instance.grid[i]});
    r.region_of_pixel[i] = id;
    ++r.pixel_counts[id];
  }
  return r;
}

int RegionIndex::find(const RegionKey& key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return -1;
  return static_cast<int>(it - keys.begin());
}

Tensor<float> broadcast_features(const RegionIndex& regions, const StyleVectors& features) {
  Tensor<float> out(1, regions.height, regions.width, 3);
  std::vector<const StyleVector*> lookup(regions.keys.size(), nullptr);
  for (std::size_t r = 0; r < regions.keys.size(); ++r) {
    auto it = features.find(regions.keys[r]);
    if (it == features.end())
      throw IncompleteStyleError("no style vector for instance " + std::to_string(regions.keys[r].instance_id) +
                                 " of class " + std::to_string(regions.keys[r].class_id));
    lookup[r] = &it->second;
  }
  for (std::size_t p = 0; p < regions.region_of_pixel.size(); ++p) {
    const StyleVector& v = *lookup[regions.region_of_pixel[p]];
    std::copy(v.begin(), v.end(), out.data() + p * 3);
  }
  return out;
}

ConditioningTensor build_conditioning(const LabelMap& label, const InstanceMap& instance,
                                      const StyleVectors* features, bool use_boundary) {
  validate_pair(label, instance);
  const int C = label.num_classes;
  const int F = features ? 3 : 0;
  ConditioningTensor cond;
  cond.num_classes = C;
  cond.feature_planes = F;
  cond.planes = Tensor<float>(1, label.height, label.width, C + 1 + F);
  const std::size_t planes = static_cast<std::size_t>(C + 1 + F);
  for (std::size_t i = 0; i < label.grid.size(); ++i) cond.planes[i * planes + label.grid[i]] = 1.0f;
  if (use_boundary) {
    const BoundaryMap b = compute_boundary_map(instance);
    for (std::size_t i = 0; i < b.grid.size(); ++i) cond.planes[i * planes + C] = b.grid[i];
  }
  if (features) {
    const Tensor<float> f = broadcast_features(RegionIndex::build(label, instance), *features);
    for (std::size_t i = 0; i < label.grid.size(); ++i)
      std::copy_n(f.data() + i * 3, 3, cond.planes.data() + i * planes + C + 1);
  }
  return cond;
}

}  // namespace labelsynth
