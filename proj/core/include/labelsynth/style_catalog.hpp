#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/encoder.hpp"
#include "labelsynth/label_maps.hpp"

namespace labelsynth {

struct KMeansOptions {
  int k = 10;
  std::uint64_t seed = 0;
  int max_iterations = 300;
  double relative_tolerance = 1e-6;
};

struct KMeansResult {
  std::vector<StyleVector> centers;
  std::vector<int> assignment;         // point -> center
  std::vector<int> counts;             // center -> member count
  std::vector<double> inertia_history; // after each assignment step
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Returns min(k, n) centers
/// (duplicates allowed when points coincide); empty input yields no centers.
KMeansResult kmeans(const std::vector<StyleVector>& points, const KMeansOptions& options);

/// Index of the closest center (lowest index on ties).
int nearest_center(const std::vector<StyleVector>& centers, const StyleVector& p);

struct ClassStyles {
  std::vector<StyleVector> centers;
  std::vector<int> counts;
};

/// Per-class style modes: K-means centers over harvested instance features.
struct StyleCatalog {
  int k = 10;
  std::map<int32_t, ClassStyles> classes;

  const ClassStyles* find(int32_t class_id) const {
    auto it = classes.find(class_id);
    return it == classes.end() ? nullptr : &it->second;
  }

  nlohmann::json to_json() const;
  static StyleCatalog from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static StyleCatalog load(const std::string& path);
};

/// Clusters the features of each class separately. `num_classes` guarantees an
/// (empty) entry for classes with no harvested instances.
StyleCatalog build_style_catalog(const std::vector<InstanceFeature>& features, const KMeansOptions& options,
                                 int num_classes = 0);

/// How one instance's style is chosen.
struct StyleSelection {
  struct Random {};
  std::variant<Random, int, StyleVector> choice = Random{};

  static StyleSelection cluster(int index) { return {index}; }
  static StyleSelection vector(StyleVector v) { return {v}; }
  static StyleSelection random() { return {Random{}}; }
};

/// Resolves a style vector for every region present in the maps. Selections
/// are keyed by instance ID; the entry for ID 0 applies to every stuff region
/// (using each class's own catalog). Missing entries default to random draws,
/// uniform over the class's centers under `seed`. Throws SelectionError for an
/// out-of-range cluster index or a class with no centers.
StyleVectors sample_styles(const StyleCatalog& catalog, const LabelMap& label, const InstanceMap& instance,
                           const std::map<int32_t, StyleSelection>& selection, std::uint64_t seed);

}  // namespace labelsynth
