#include "labelsynth/shapes_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace labelsynth {

namespace {

using Rgb = std::array<float, 3>;

// Base colours per class, chosen with disjoint hue ranges so a small
// segmenter separates classes from appearance alone.
constexpr std::array<std::array<Rgb, 4>, kShapesWorldClasses> kPalette = {{
    {{{120, 180, 235}, {175, 215, 245}, {95, 140, 215}, {200, 225, 240}}},
    {{{115, 80, 45}, {80, 125, 50}, {150, 125, 85}, {95, 95, 90}}},
    {{{215, 45, 40}, {235, 145, 25}, {230, 210, 45}, {200, 40, 145}}},
    {{{20, 140, 130}, {105, 40, 170}, {25, 30, 110}, {150, 220, 40}}},
}};

enum class Pattern { solid, stripes, checker };

struct Style {
  Rgb base;
  Rgb accent;
  Pattern pattern;
  int period;
};

Style make_style(int cls, int s) {
  const Rgb base = kPalette[static_cast<std::size_t>(cls)][static_cast<std::size_t>(s % 4)];
  Style st{base, {base[0] * 0.6f, base[1] * 0.6f, base[2] * 0.6f}, Pattern::solid, 8};
  st.pattern = static_cast<Pattern>((s + s / 4) % 3);
  st.period = 6 + 2 * ((s / 4) % 3);
  return st;
}

// Texture value at (y, x); coordinates are relative to the region origin so a
// style looks the same wherever the object lands. Sky fades toward white near
// the horizon.
Rgb shade(const Style& st, int y, int x, int cls, float horizon_frac) {
  bool accent = false;
  switch (st.pattern) {
    case Pattern::solid: break;
    case Pattern::stripes: accent = (y / (st.period / 2)) % 2 == 1; break;
    case Pattern::checker: accent = ((y / st.period) + (x / st.period)) % 2 == 1; break;
  }
  Rgb c = accent ? st.accent : st.base;
  if (cls == 0) {
    const float t = 0.35f * horizon_frac;
    for (auto& v : c) v = v + (255.0f - v) * t;
  }
  return c;
}

struct Object {
  bool disc;
  int cy, cx, ry, rx;  // disc: radius in ry; rect: half extents
  int style;
};

bool inside(const Object& o, int y, int x) {
  if (o.disc) {
    const int dy = y - o.cy, dx = x - o.cx;
    return dy * dy + dx * dx <= o.ry * o.ry;
  }
  return std::abs(y - o.cy) <= o.ry && std::abs(x - o.cx) <= o.rx;
}

// Bounding boxes separated by a margin, so objects never touch.
bool overlaps(const Object& a, const Object& b) {
  const int ax = a.disc ? a.ry : a.rx, bx = b.disc ? b.ry : b.rx;
  constexpr int margin = 2;
  return std::abs(a.cy - b.cy) <= a.ry + b.ry + margin && std::abs(a.cx - b.cx) <= ax + bx + margin;
}

std::string tag(int cls, int style) { return "c" + std::to_string(cls) + "s" + std::to_string(style); }

bool try_layout(std::mt19937_64& rng, const ShapesWorldOptions& o, std::vector<Object>& objects) {
  std::uniform_int_distribution<int> count_dist(1, 6), style_dist(0, o.styles_per_class - 1), kind(0, 1);
  const int n = count_dist(rng);
  const int small = std::min(o.height, o.width);
  std::uniform_int_distribution<int> size_dist(std::max(3, small / 14), std::max(4, small / 5));
  constexpr int kRetries = 60;
  objects.clear();
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
      Object ob{};
      ob.disc = kind(rng) == 0;
      ob.ry = size_dist(rng);
      ob.rx = ob.disc ? ob.ry : size_dist(rng);
      if (2 * ob.ry + 2 >= o.height || 2 * ob.rx + 2 >= o.width) continue;
      ob.cy = std::uniform_int_distribution<int>(ob.ry + 1, o.height - ob.ry - 2)(rng);
      ob.cx = std::uniform_int_distribution<int>(ob.rx + 1, o.width - ob.rx - 2)(rng);
      ob.style = style_dist(rng);
      if (std::none_of(objects.begin(), objects.end(), [&](const Object& p) { return overlaps(p, ob); })) {
        objects.push_back(ob);
        placed = true;
      }
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace

Dataset generate_shapes_dataset(const ShapesWorldOptions& o) {
  if (o.height <= 0 || o.width <= 0 || o.height % 32 != 0 || o.width % 32 != 0)
    throw ShapeError("shapes world dims must be positive multiples of 32, got " + std::to_string(o.height) + "x" +
                     std::to_string(o.width));
  if (o.styles_per_class < 1) throw Error("styles_per_class must be at least 1");
  if (o.count < 0) throw Error("count must be non-negative");

  Dataset d;
  d.num_classes = kShapesWorldClasses;
  d.meta["class_names"] = kShapesWorldClassNames;
  d.meta["styles_per_class"] = o.styles_per_class;
  d.meta["seed"] = o.seed;
  d.meta["samples"] = nlohmann::json::object();

  for (int i = 0; i < o.count; ++i) {
    const int index = o.first_index + i;
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);

    std::vector<Object> objects;
    // A layout that cannot fit all its objects is discarded and redrawn.
    while (!try_layout(rng, o, objects)) {
    }
    std::uniform_int_distribution<int> style_dist(0, o.styles_per_class - 1);
    const int sky_style = style_dist(rng), ground_style = style_dist(rng);
    const int horizon = std::uniform_int_distribution<int>(o.height * 3 / 10, o.height * 6 / 10)(rng);

    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "s%06d", index);
    SamplePair s;
    s.id = id_buf;
    s.label = LabelMap(o.height, o.width, kShapesWorldClasses);
    s.instance = InstanceMap(o.height, o.width);
    s.image = Tensor<float>(1, o.height, o.width, 3);

    const Style sky = make_style(0, sky_style), ground = make_style(1, ground_style);
    for (int y = 0; y < o.height; ++y)
      for (int x = 0; x < o.width; ++x) {
        const bool is_sky = y < horizon;
        const float frac = is_sky ? static_cast<float>(y) / static_cast<float>(std::max(1, horizon)) : 0.0f;
        const Rgb c = is_sky ? shade(sky, y, x, 0, frac) : shade(ground, y - horizon, x, 1, 0.0f);
        s.label.at(y, x) = is_sky ? 0 : 1;
        for (int ch = 0; ch < 3; ++ch) s.image(0, y, x, ch) = unit_from_byte(static_cast<std::uint8_t>(c[ch]));
      }

    nlohmann::json tags = nlohmann::json::object();
    tags["stuff0"] = tag(0, sky_style);
    tags["stuff1"] = tag(1, ground_style);
    for (std::size_t k = 0; k < objects.size(); ++k) {
      const Object& ob = objects[k];
      const int cls = ob.disc ? 2 : 3;
      const int id = static_cast<int>(k) + 1;
      const Style st = make_style(cls, ob.style);
      for (int y = std::max(0, ob.cy - ob.ry); y <= std::min(o.height - 1, ob.cy + ob.ry); ++y)
        for (int x = std::max(0, ob.cx - ob.rx); x <= std::min(o.width - 1, ob.cx + ob.rx); ++x) {
          if (!inside(ob, y, x)) continue;
          s.label.at(y, x) = cls;
          s.instance.at(y, x) = id;
          const Rgb c = shade(st, y - (ob.cy - ob.ry), x - (ob.cx - ob.rx), cls, 0.0f);
          for (int ch = 0; ch < 3; ++ch) s.image(0, y, x, ch) = unit_from_byte(static_cast<std::uint8_t>(c[ch]));
        }
      tags[std::to_string(id)] = tag(cls, ob.style);
    }
    d.meta["samples"][s.id] = std::move(tags);
    validate_sample(s);
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace labelsynth
