#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "labelsynth/dataset.hpp"

namespace labelsynth {

/// Procedural scenes: sky (class 0) over ground (class 1), with 1-6
/// non-overlapping discs (class 2) and rectangles (class 3). Every region is
/// painted with a texture drawn from its class's style set.
struct ShapesWorldOptions {
  std::uint64_t seed = 0;
  int count = 100;
  int height = 128;
  int width = 256;
  int styles_per_class = 4;
  int first_index = 0;  // ids run from s<first_index> upward
};

inline constexpr int kShapesWorldClasses = 4;
inline constexpr std::array<const char*, kShapesWorldClasses> kShapesWorldClassNames = {"sky", "ground", "disc",
                                                                                          "rect"};

/// Deterministic under `seed`. Throws ShapeError unless both dims are
/// multiples of 32. meta["samples"][id] maps each region (instance ID, or
/// "stuff<class>") to its texture tag "c<class>s<style>".
Dataset generate_shapes_dataset(const ShapesWorldOptions& options);

}  // namespace labelsynth
