#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/model.hpp"

namespace labelsynth {

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

/// Checkpoint archive: named float32 arrays plus a JSON manifest.
///
/// On-disk layout (all integers little-endian):
///   "LSBUNDLE" | u32 version | u32 manifest bytes | manifest JSON |
///   array payloads (float32, manifest order) | u32 CRC-32 of everything before.
/// The manifest's "arrays" table records each array's name, shape, and CRC-32.
struct Bundle {
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_bundle(const Bundle& bundle);
/// Throws IntegrityError on any structural or checksum failure.
Bundle parse_bundle(const std::vector<std::uint8_t>& bytes);

/// Atomic: the archive is written beside `path` and renamed into place.
void save_bundle(const std::string& path, const Bundle& bundle);
Bundle load_bundle(const std::string& path);

/// Snapshot of every model parameter; manifest gets "model" (the ModelSpec, which
/// carries the architecture strings) merged with `extra`.
Bundle bundle_from_model(GanModel<float>& model, const nlohmann::json& extra = nlohmann::json::object());

/// Copies bundle arrays into `model`. Every parameter is checked before any is
/// written; the first missing or mis-shaped one raises ShapeError naming it.
void load_parameters(const Bundle& bundle, GanModel<float>& model);

/// Rebuilds the model described by the manifest and loads its parameters.
GanModel<float> model_from_bundle(const Bundle& bundle);

std::uint32_t crc32_of(const void* data, std::size_t size);

}  // namespace labelsynth
