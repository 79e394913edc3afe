#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "labelsynth/dataset.hpp"
#include "labelsynth/png_io.hpp"
#include "labelsynth/shapes_world.hpp"

using namespace labelsynth;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("labelsynth_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::uint8_t> dir_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, dir).string();
    all.insert(all.end(), rel.begin(), rel.end());
    const auto b = png::read_bytes(f.string());
    all.insert(all.end(), b.begin(), b.end());
  }
  return all;
}

}  // namespace

TEST(ShapesWorld, SameSeedGivesIdenticalBytes) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  save_dataset(a.string(), generate_shapes_dataset({.seed = 0, .count = 1}));
  save_dataset(b.string(), generate_shapes_dataset({.seed = 0, .count = 1}));
  EXPECT_EQ(dir_bytes(a), dir_bytes(b));
  const fs::path c = scratch("det_c");
  save_dataset(c.string(), generate_shapes_dataset({.seed = 1, .count = 1}));
  EXPECT_NE(dir_bytes(a), dir_bytes(c));
}

TEST(ShapesWorld, EverySampleHonorsMapContracts) {
  const Dataset d = generate_shapes_dataset({.seed = 3, .count = 40, .height = 64, .width = 96});
  ASSERT_EQ(d.size(), 40u);
  for (const auto& s : d.samples) {
    ASSERT_NO_THROW(validate_sample(s)) << s.id;
    std::set<int> ids;
    for (int y = 0; y < s.label.height; ++y)
      for (int x = 0; x < s.label.width; ++x) {
        const int c = s.label.at(y, x), i = s.instance.at(y, x);
        EXPECT_EQ(c >= 2, i != 0) << s.id;
        if (i) ids.insert(i);
      }
    EXPECT_GE(ids.size(), 1u);
    EXPECT_LE(ids.size(), 6u);
    // Instance IDs are unique per object: each id occupies one 4-connected component.
    for (int id : ids) {
      std::vector<int> seen(s.instance.size(), 0);
      int components = 0;
      for (std::size_t p = 0; p < s.instance.size(); ++p) {
        if (s.instance.grid[p] != id || seen[p]) continue;
        ++components;
        std::vector<std::size_t> stack{p};
        seen[p] = 1;
        while (!stack.empty()) {
          const std::size_t q = stack.back();
          stack.pop_back();
          const int y = static_cast<int>(q) / s.instance.width, x = static_cast<int>(q) % s.instance.width;
          const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
          for (int k = 0; k < 4; ++k) {
            const int ny = y + dy[k], nx = x + dx[k];
            if (ny < 0 || nx < 0 || ny >= s.instance.height || nx >= s.instance.width) continue;
            const std::size_t r = static_cast<std::size_t>(ny) * s.instance.width + nx;
            if (s.instance.grid[r] == id && !seen[r]) {
              seen[r] = 1;
              stack.push_back(r);
            }
          }
        }
      }
      EXPECT_EQ(components, 1) << s.id << " id " << id;
    }
    for (float v : s.image.span()) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(ShapesWorld, DiscClassUsesSeveralTextures) {
  const Dataset d = generate_shapes_dataset({.seed = 0, .count = 100, .height = 64, .width = 64});
  std::set<std::string> tags;
  for (const auto& [id, regions] : d.meta.at("samples").items())
    for (const auto& [key, tag] : regions.items()) {
      const std::string t = tag.get<std::string>();
      if (t.rfind("c2", 0) == 0) tags.insert(t);
    }
  EXPECT_GE(tags.size(), 2u);
}

TEST(ShapesWorld, RejectsDimsNotDivisibleBy32) {
  EXPECT_THROW(generate_shapes_dataset({.seed = 0, .count = 1, .height = 100, .width = 64}), ShapeError);
}

TEST(Dataset, EmptyDirectoryLoadsEmpty) {
  const fs::path p = scratch("empty");
  fs::create_directories(p);
  EXPECT_TRUE(load_dataset(p.string()).empty());
}

TEST(Dataset, SaveLoadRoundTripIsExact) {
  const Dataset d = generate_shapes_dataset({.seed = 9, .count = 5, .height = 32, .width = 64});
  const fs::path p = scratch("roundtrip");
  save_dataset(p.string(), d);
  const Dataset r = load_dataset(p.string());
  ASSERT_EQ(r.size(), d.size());
  EXPECT_EQ(r.num_classes, kShapesWorldClasses);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(r.samples[i].id, d.samples[i].id);
    EXPECT_EQ(r.samples[i].label, d.samples[i].label);
    EXPECT_EQ(r.samples[i].instance, d.samples[i].instance);
    EXPECT_EQ(rgb8_samples(r.samples[i].image), rgb8_samples(d.samples[i].image));
  }
}

TEST(Dataset, MismatchedDimsNameTheSample) {
  const Dataset d = generate_shapes_dataset({.seed = 2, .count = 2, .height = 32, .width = 32});
  const fs::path p = scratch("corrupt");
  save_dataset(p.string(), d);
  png::Raster small{.height = 16, .width = 32, .channels = 1, .bit_depth = 16,
                    .samples = std::vector<std::uint16_t>(16 * 32, 0)};
  png::write_file((p / "instances" / (d.samples[1].id + ".png")).string(), small);
  try {
    load_dataset(p.string());
    FAIL() << "expected CorruptSampleError";
  } catch (const CorruptSampleError& e) {
    EXPECT_NE(std::string(e.what()).find(d.samples[1].id), std::string::npos) << e.what();
  }
}

TEST(Dataset, ImagesScaledToUnitRange) {
  EXPECT_FLOAT_EQ(unit_from_byte(0), -1.0f);
  EXPECT_FLOAT_EQ(unit_from_byte(255), 1.0f);
  for (int v = 0; v < 256; ++v) EXPECT_EQ(byte_from_unit(unit_from_byte(static_cast<std::uint8_t>(v))), v);
}

TEST(Batches, FixedSeedGivesIdenticalOrder) {
  const auto a = iterate_batches(23, 4, 77), b = iterate_batches(23, 4, 77), c = iterate_batches(23, 4, 78);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::vector<std::size_t> all;
  for (const auto& batch : a) {
    EXPECT_LE(batch.size(), 4u);
    all.insert(all.end(), batch.begin(), batch.end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 23; ++i) EXPECT_EQ(all[i], i);
}

TEST(Png, SixteenBitRoundTrip) {
  png::Raster r{.height = 3, .width = 5, .channels = 1, .bit_depth = 16, .samples = {}};
  for (int i = 0; i < 15; ++i) r.samples.push_back(static_cast<std::uint16_t>(i * 4099));
  const png::Raster back = png::decode(png::encode(r));
  EXPECT_EQ(back.bit_depth, 16);
  EXPECT_EQ(back.samples, r.samples);
}

TEST(Png, GarbageRejected) {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
  EXPECT_THROW(png::decode(junk), Error);
}
