#include "labelsynth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "labelsynth/png_io.hpp"

namespace labelsynth {

namespace fs = std::filesystem;

std::pair<Dataset, Dataset> Dataset::split(std::size_t count) const {
  count = std::min(count, samples.size());
  Dataset a, b;
  a.num_classes = b.num_classes = num_classes;
  a.meta = b.meta = meta;
  a.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(count));
  b.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(count), samples.end());
  return {std::move(a), std::move(b)};
}

void validate_sample(const SamplePair& s) {
  try {
    validate_pair(s.label, s.instance);
  } catch (const Error& e) {
    throw CorruptSampleError(s.id, e.what());
  }
  if (s.image.n() != 1 || s.image.c() != 3 || s.image.h() != s.label.height || s.image.w() != s.label.width)
    throw CorruptSampleError(s.id, "image shape " + s.image.shape_string() + " does not match label map " +
                                       std::to_string(s.label.height) + "x" + std::to_string(s.label.width));
}

float unit_from_byte(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t byte_from_unit(float v) {
  const float b = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(b, 0.0f, 255.0f));
}

std::vector<std::uint16_t> rgb8_samples(const Tensor<float>& image) {
  std::vector<std::uint16_t> out(static_cast<std::size_t>(image.h()) * image.w() * 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = byte_from_unit(image[i]);
  return out;
}

namespace {

std::string sample_path(const std::string& dir, const char* sub, const std::string& id) {
  return (fs::path(dir) / sub / (id + ".png")).string();
}

SamplePair load_sample(const std::string& dir, const std::string& id, int num_classes) {
  SamplePair s;
  s.id = id;
  png::Raster lab, ins, img;
  try {
    lab = png::read_file(sample_path(dir, "labels", id));
    ins = png::read_file(sample_path(dir, "instances", id));
    img = png::read_file(sample_path(dir, "images", id));
  } catch (const Error& e) {
    throw CorruptSampleError(id, e.what());
  }
  if (lab.channels != 1) throw CorruptSampleError(id, "label map must be single-channel");
  if (ins.channels != 1) throw CorruptSampleError(id, "instance map must be single-channel");
  if (img.channels != 3 || img.bit_depth != 8) throw CorruptSampleError(id, "image must be 8-bit RGB");
  if (lab.height != ins.height || lab.width != ins.width || lab.height != img.height || lab.width != img.width)
    throw CorruptSampleError(id, "label " + std::to_string(lab.height) + "x" + std::to_string(lab.width) +
                                     ", instance " + std::to_string(ins.height) + "x" + std::to_string(ins.width) +
                                     ", image " + std::to_string(img.height) + "x" + std::to_string(img.width));
  s.label = LabelMap(lab.height, lab.width, num_classes);
  std::copy(lab.samples.begin(), lab.samples.end(), s.label.grid.begin());
  s.instance = InstanceMap(ins.height, ins.width);
  std::copy(ins.samples.begin(), ins.samples.end(), s.instance.grid.begin());
  s.image = Tensor<float>(1, img.height, img.width, 3);
  for (std::size_t i = 0; i < img.samples.size(); ++i) s.image[i] = unit_from_byte(static_cast<std::uint8_t>(img.samples[i]));
  validate_sample(s);
  return s;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& dataset) {
  for (const char* sub : {"labels", "instances", "images"}) fs::create_directories(fs::path(dir) / sub);
  for (const auto& s : dataset.samples) {
    validate_sample(s);
    png::Raster lab{s.label.height, s.label.width, 1, 8, {}};
    lab.samples.assign(s.label.grid.begin(), s.label.grid.end());
    png::Raster ins{s.instance.height, s.instance.width, 1, 16, {}};
    for (int32_t v : s.instance.grid) {
      if (v > 65535) throw CorruptSampleError(s.id, "instance ID exceeds 16 bits");
      ins.samples.push_back(static_cast<std::uint16_t>(v));
    }
    png::Raster img{s.image.h(), s.image.w(), 3, 8, rgb8_samples(s.image)};
    png::write_file(sample_path(dir, "labels", s.id), lab);
    png::write_file(sample_path(dir, "instances", s.id), ins);
    png::write_file(sample_path(dir, "images", s.id), img);
  }
  nlohmann::json meta = dataset.meta;
  meta["num_classes"] = dataset.num_classes;
  const std::string text = meta.dump(1);
  png::write_bytes_atomic((fs::path(dir) / "meta.json").string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  const fs::path meta_path = fs::path(dir) / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    try {
      d.meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(meta_path.string() + ": " + e.what());
    }
    d.num_classes = d.meta.value("num_classes", 0);
  }
  const fs::path labels = fs::path(dir) / "labels";
  if (!fs::is_directory(labels)) return d;
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(labels))
    if (entry.is_regular_file() && entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  const bool infer_classes = d.num_classes == 0;
  // Without meta.json the class count is inferred after loading.
  for (const auto& id : ids) d.samples.push_back(load_sample(dir, id, infer_classes ? 65536 : d.num_classes));
  if (infer_classes && !d.samples.empty()) {
    int32_t top = 1;
    for (const auto& s : d.samples) top = std::max(top, *std::max_element(s.label.grid.begin(), s.label.grid.end()));
    d.num_classes = top + 1;
    for (auto& s : d.samples) s.label.num_classes = d.num_classes;
  }
  return d;
}

std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return batches;
}

}  // namespace labelsynth
