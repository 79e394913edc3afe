#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/label_maps.hpp"

namespace labelsynth {

/// One training example. `image` is (1, h, w, 3) with values in [-1, 1].
struct SamplePair {
  std::string id;
  LabelMap label;
  InstanceMap instance;
  Tensor<float> image;
};

struct Dataset {
  int num_classes = 0;
  std::vector<SamplePair> samples;
  /// Free-form metadata stored in meta.json (style tags for generated data).
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// First `count` samples and the rest, in order.
  std::pair<Dataset, Dataset> split(std::size_t count) const;
};

/// Checks label/instance/image agreement; throws CorruptSampleError naming the id.
void validate_sample(const SamplePair& s);

/// 8-bit channel value to [-1, 1] and back (rounded, clamped).
float unit_from_byte(std::uint8_t v);
std::uint8_t byte_from_unit(float v);
/// (1, h, w, 3) image to interleaved 8-bit RGB samples.
std::vector<std::uint16_t> rgb8_samples(const Tensor<float>& image);

/// Writes `labels/`, `instances/`, `images/` and `meta.json` under `dir`.
void save_dataset(const std::string& dir, const Dataset& dataset);
/// Loads every sample listed under `labels/`, sorted by id. A missing or empty
/// directory yields an empty dataset.
Dataset load_dataset(const std::string& dir);

/// Sample indices grouped into batches. Order is a seeded shuffle (identical
/// across runs for the same seed); the last batch may be short.
std::vector<std::vector<std::size_t>> iterate_batches(std::size_t dataset_size, std::size_t batch_size,
                                                      std::uint64_t shuffle_seed);

}  // namespace labelsynth
