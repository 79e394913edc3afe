#include "labelsynth/bundle.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "labelsynth/png_io.hpp"

namespace labelsynth {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'B', 'U', 'N', 'D', 'L', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_floats(std::vector<std::uint8_t>& out, const std::vector<float>& data) {
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw IntegrityError("negative dimension in array shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_text(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

std::uint32_t crc32_of(const void* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

const NamedArray* Bundle::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

std::vector<std::uint8_t> serialize_bundle(const Bundle& bundle) {
  nlohmann::json manifest = bundle.manifest;
  nlohmann::json table = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& a : bundle.arrays) {
    if (element_count(a.shape) != a.data.size())
      throw ShapeError("array " + a.name + ": shape " + shape_text(a.shape) + " does not match " +
                       std::to_string(a.data.size()) + " values");
    const std::size_t start = payload.size();
    put_floats(payload, a.data);
    table.push_back({{"name", a.name}, {"shape", a.shape}, {"crc32", crc32_of(payload.data() + start, payload.size() - start)}});
  }
  manifest["arrays"] = std::move(table);
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

Bundle parse_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw IntegrityError("not a bundle archive");
  const std::size_t body = bytes.size() - 4;
  if (crc32_of(bytes.data(), body) != get_u32(bytes.data() + body)) throw IntegrityError("archive checksum mismatch");
  if (get_u32(bytes.data() + 8) != kVersion) throw IntegrityError("unsupported bundle version");
  const std::size_t manifest_size = get_u32(bytes.data() + 12);
  if (16 + manifest_size > body) throw IntegrityError("manifest overruns archive");

  Bundle b;
  try {
    b.manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("manifest: ") + e.what());
  }
  if (!b.manifest.contains("arrays") || !b.manifest["arrays"].is_array()) throw IntegrityError("manifest has no array table");
  std::size_t offset = 16 + manifest_size;
  for (const auto& entry : b.manifest["arrays"]) {
    NamedArray a;
    try {
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(std::string("array table: ") + e.what());
    }
    const std::size_t n = element_count(a.shape);
    if (offset + 4 * n > body) throw IntegrityError("array " + a.name + " overruns archive");
    if (crc32_of(bytes.data() + offset, 4 * n) != entry.value("crc32", std::uint32_t{0}))
      throw IntegrityError("array " + a.name + " checksum mismatch");
    a.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) a.data[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
    offset += 4 * n;
    b.arrays.push_back(std::move(a));
  }
  if (offset != body) throw IntegrityError("trailing bytes after arrays");
  b.manifest.erase("arrays");
  return b;
}

void save_bundle(const std::string& path, const Bundle& bundle) { png::write_bytes_atomic(path, serialize_bundle(bundle)); }

Bundle load_bundle(const std::string& path) {
  const auto bytes = png::read_bytes(path);
  try {
    return parse_bundle(bytes);
  } catch (const IntegrityError& e) {
    throw IntegrityError(path + ": " + e.what());
  }
}

Bundle bundle_from_model(GanModel<float>& model, const nlohmann::json& extra) {
  Bundle b;
  b.manifest = extra;
  b.manifest["format"] = "labelsynth-bundle";
  b.manifest["model"] = model.spec.to_json();
  for (auto* p : model.all_parameters()) b.arrays.push_back({p->name, p->shape, {p->value.begin(), p->value.end()}});
  return b;
}

void load_parameters(const Bundle& bundle, GanModel<float>& model) {
  const auto params = model.all_parameters();
  std::vector<const NamedArray*> sources;
  for (auto* p : params) {
    const NamedArray* a = bundle.find(p->name);
    if (!a) throw ShapeError("parameter " + p->name + " missing from bundle");
    if (a->shape != p->shape)
      throw ShapeError("parameter " + p->name + ": bundle shape " + shape_text(a->shape) + " vs model shape " +
                       shape_text(p->shape));
    sources.push_back(a);
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.assign(sources[i]->data.begin(), sources[i]->data.end());
}

GanModel<float> model_from_bundle(const Bundle& bundle) {
  if (!bundle.manifest.contains("model")) throw IntegrityError("manifest has no model description");
  ModelSpec spec;
  try {
    spec = ModelSpec::from_json(bundle.manifest["model"]);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("model description: ") + e.what());
  }
  GanModel<float> model(spec);
  load_parameters(bundle, model);
  return model;
}

}  // namespace labelsynth
