#include "labelsynth/service.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "labelsynth/dataset.hpp"
#include "labelsynth/png_io.hpp"
#include "labelsynth/synthesis.hpp"

namespace labelsynth {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw Error("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw Error("malformed base64");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

nlohmann::json rle_encode(const std::vector<int32_t>& grid, int height, int width) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size();) {
    std::size_t j = i;
    while (j < grid.size() && grid[j] == grid[i]) ++j;
    runs.push_back({grid[i], j - i});
    i = j;
  }
  return {{"height", height}, {"width", width}, {"runs", runs}};
}

namespace {

/// A client-facing failure: HTTP status plus the machine-readable body.
struct RequestError {
  int status;
  std::string code;
  std::string message;
  std::string field;
};

HttpReply error_reply(const RequestError& e) {
  return {e.status, nlohmann::json{{"code", e.code}, {"message", e.message}, {"field", e.field}}.dump()};
}

struct Grid {
  int height = 0, width = 0;
  std::vector<int32_t> values;
};

Grid decode_map(const nlohmann::json& j, const std::string& field) {
  auto bad = [&](const std::string& msg) { return RequestError{400, "invalid_map", msg, field}; };
  if (!j.is_object()) throw bad("expected an object with 'png' or 'rle'");
  Grid g;
  if (j.contains("png")) {
    if (!j["png"].is_string()) throw bad("'png' must be a base64 string");
    png::Raster r;
    try {
      r = png::decode(base64_decode(j["png"].get<std::string>()));
    } catch (const Error& e) {
      throw bad(e.what());
    }
    if (r.channels != 1) throw bad("map PNG must be single-channel grayscale");
    g.height = r.height;
    g.width = r.width;
    g.values.assign(r.samples.begin(), r.samples.end());
    return g;
  }
  if (j.contains("rle")) {
    const auto& rle = j["rle"];
    try {
      g.height = rle.at("height").get<int>();
      g.width = rle.at("width").get<int>();
      if (g.height <= 0 || g.width <= 0) throw bad("dims must be positive");
      const std::size_t total = static_cast<std::size_t>(g.height) * static_cast<std::size_t>(g.width);
      for (const auto& run : rle.at("runs")) {
        const auto value = run.at(0).get<std::int64_t>();
        const auto count = run.at(1).get<std::int64_t>();
        if (count < 0 || value < 0 || value > 65535) throw bad("run values must be in [0, 65535] with count >= 0");
        if (g.values.size() + static_cast<std::size_t>(count) > total) throw bad("runs exceed height*width");
        g.values.insert(g.values.end(), static_cast<std::size_t>(count), static_cast<int32_t>(value));
      }
      if (g.values.size() != total) throw bad("runs cover fewer than height*width pixels");
    } catch (const nlohmann::json::exception& e) {
      throw bad(std::string("malformed rle: ") + e.what());
    }
    return g;
  }
  throw bad("expected 'png' or 'rle'");
}

StyleSelection parse_selection(const nlohmann::json& j, const std::string& field) {
  if (j.is_string() && j.get<std::string>() == "random") return StyleSelection::random();
  if (j.is_object() && j.contains("cluster")) {
    if (!j["cluster"].is_number_integer()) throw RequestError{400, "invalid_style", "cluster must be an integer", field};
    return StyleSelection::cluster(j["cluster"].get<int>());
  }
  if (j.is_object() && j.contains("vector")) {
    const auto& v = j["vector"];
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const auto& x) { return x.is_number(); }))
      throw RequestError{400, "invalid_style", "vector must hold 3 numbers", field};
    StyleVector sv{v[0].get<float>(), v[1].get<float>(), v[2].get<float>()};
    if (!std::all_of(sv.begin(), sv.end(), [](float x) { return std::isfinite(x); }))
      throw RequestError{400, "invalid_style", "vector must be finite", field};
    return StyleSelection::vector(sv);
  }
  throw RequestError{400, "invalid_style", "expected {\"cluster\": k}, {\"vector\": [a,b,c]}, or \"random\"", field};
}

/// Counting admission gate: `capacity` requests admitted, `slots` running.
class Gate {
 public:
  Gate(int slots, int capacity) : slots_(slots), capacity_(capacity) {}
  bool admit() {
    std::lock_guard lock(mu_);
    if (admitted_ >= capacity_) return false;
    ++admitted_;
    return true;
  }
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return running_ < slots_; });
    ++running_;
  }
  void release() {
    std::lock_guard lock(mu_);
    --running_;
    --admitted_;
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_, capacity_;
  int admitted_ = 0, running_ = 0;
};

}  // namespace

struct SynthesisService::Impl {
  ServiceOptions options;
  std::unique_ptr<GanModel<float>> model;
  std::optional<StyleCatalog> catalog;
  nlohmann::json manifest;
  std::atomic<bool> ready{false};
  Gate gate;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ServiceOptions o) : options(std::move(o)), gate(std::max(1, options.compute_slots), std::max(1, options.queue_capacity)) {}

  HttpReply synthesize(const std::string& body);
};

SynthesisService::SynthesisService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto& svr = impl_->server;
  const int threads = std::max(2, impl_->options.http_threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  svr.Post("/synthesize", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, synthesize(req.body)); });
  svr.Get("/styles", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> cls;
    if (req.has_param("class")) cls = req.get_param_value("class");
    send(res, styles(cls));
  });
  svr.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  svr.Get("/meta", [this, send](const httplib::Request&, httplib::Response& res) { send(res, meta()); });
  if (!impl_->options.static_dir.empty() && !svr.set_mount_point("/", impl_->options.static_dir))
    throw Error("static directory " + impl_->options.static_dir + " does not exist");
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404)
      res.set_content(nlohmann::json{{"code", "not_found"}, {"message", "no route for " + req.path}, {"field", ""}}.dump(),
                      "application/json");
  });
}

SynthesisService::~SynthesisService() { stop(); }

void SynthesisService::load(GanModel<float> model, std::optional<StyleCatalog> catalog, nlohmann::json manifest) {
  if (impl_->ready) throw Error("service already loaded");
  if (model.spec.use_encoder && !catalog) throw ConfigError("an encoder model needs a style catalog");
  impl_->model = std::make_unique<GanModel<float>>(std::move(model));
  impl_->catalog = std::move(catalog);
  impl_->manifest = std::move(manifest);
  impl_->ready = true;
}

bool SynthesisService::loaded() const { return impl_->ready; }

HttpReply SynthesisService::health() const {
  return {200, nlohmann::json{{"status", impl_->ready ? "ok" : "loading"}}.dump()};
}

HttpReply SynthesisService::meta() const {
  if (!impl_->ready) return error_reply({503, "not_loaded", "model not loaded yet", ""});
  const ModelSpec& s = impl_->model->spec;
  nlohmann::json arch = {{"global", s.global_arch}, {"discriminator", s.discriminator_arch}};
  if (s.with_enhancer) arch["enhancer"] = s.enhancer_arch;
  if (s.use_encoder) arch["encoder"] = s.encoder_arch;
  nlohmann::json j = {{"num_classes", s.num_classes},
                      {"arch", arch},
                      {"width_divisor", s.width_divisor},
                      {"use_encoder", s.use_encoder},
                      {"use_instance_maps", s.use_instance_maps},
                      {"composed", s.with_enhancer},
                      {"max_height", impl_->options.max_height},
                      {"max_width", impl_->options.max_width},
                      {"dim_multiple", 32}};
  if (impl_->manifest.contains("class_names")) j["class_names"] = impl_->manifest["class_names"];
  return {200, j.dump()};
}

HttpReply SynthesisService::styles(const std::optional<std::string>& class_param) const {
  if (!impl_->ready) return error_reply({503, "not_loaded", "model not loaded yet", ""});
  if (!class_param) return error_reply({400, "missing_param", "query parameter 'class' is required", "class"});
  int cls = -1;
  try {
    std::size_t used = 0;
    cls = std::stoi(*class_param, &used);
    if (used != class_param->size()) cls = -1;
  } catch (const std::exception&) {
    cls = -1;
  }
  const ClassStyles* styles = impl_->catalog ? impl_->catalog->find(cls) : nullptr;
  if (!styles) return error_reply({404, "unknown_class", "no styles for class '" + *class_param + "'", "class"});
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : styles->centers) centers.push_back(c);
  return {200, nlohmann::json{{"class", cls}, {"centers", centers}, {"counts", styles->counts}}.dump()};
}

HttpReply SynthesisService::synthesize(const std::string& body) {
  if (!impl_->ready) return error_reply({503, "not_loaded", "model not loaded yet", ""});
  if (!impl_->gate.admit()) return error_reply({429, "busy", "synthesis queue is full; retry later", ""});
  impl_->gate.acquire();
  HttpReply reply;
  try {
    reply = impl_->synthesize(body);
  } catch (const RequestError& e) {
    reply = error_reply(e);
  } catch (const std::exception& e) {
    reply = error_reply({500, "internal", e.what(), ""});
  }
  impl_->gate.release();
  return reply;
}

HttpReply SynthesisService::Impl::synthesize(const std::string& body) {
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError{400, "invalid_json", e.what(), ""};
  }
  if (!req.is_object()) throw RequestError{400, "invalid_json", "request body must be a JSON object", ""};
  if (!req.contains("label")) throw RequestError{400, "invalid_map", "missing label map", "label"};
  if (!req.contains("instance")) throw RequestError{400, "invalid_map", "missing instance map", "instance"};
  const Grid lg = decode_map(req["label"], "label");
  const Grid ig = decode_map(req["instance"], "instance");
  if (lg.height != ig.height || lg.width != ig.width)
    throw RequestError{400, "bad_dims", "label and instance maps differ in size", "instance"};
  if (lg.height % 32 != 0 || lg.width % 32 != 0)
    throw RequestError{400, "bad_dims", "dims must be multiples of 32, got " + std::to_string(lg.height) + "x" + std::to_string(lg.width), "label"};
  if (lg.height > options.max_height || lg.width > options.max_width)
    throw RequestError{400, "bad_dims", "dims exceed the " + std::to_string(options.max_height) + "x" + std::to_string(options.max_width) + " limit", "label"};

  const ModelSpec& spec = model->spec;
  LabelMap label(lg.height, lg.width, spec.num_classes);
  label.grid = lg.values;
  for (int32_t v : label.grid)
    if (v >= spec.num_classes)
      throw RequestError{422, "unknown_class", "class " + std::to_string(v) + " not in [0, " + std::to_string(spec.num_classes) + ")", "label"};
  InstanceMap instance(ig.height, ig.width);
  instance.grid = ig.values;
  try {
    validate_pair(label, instance);
  } catch (const Error& e) {
    throw RequestError{400, "invalid_map", e.what(), "instance"};
  }

  std::uint64_t seed = 0;
  if (req.contains("seed")) {
    if (!req["seed"].is_number_unsigned() && !req["seed"].is_number_integer())
      throw RequestError{400, "invalid_seed", "seed must be a non-negative integer", "seed"};
    seed = req["seed"].get<std::uint64_t>();
  } else {
    seed = std::random_device{}();
  }

  nlohmann::json echo = nlohmann::json::array();
  StyleVectors styles;
  if (spec.use_encoder) {
    std::map<int32_t, StyleSelection> selection;
    if (req.contains("styles")) {
      if (!req["styles"].is_object()) throw RequestError{400, "invalid_style", "styles must be an object", "styles"};
      for (const auto& [key, value] : req["styles"].items()) {
        int id = -1;
        try {
          std::size_t used = 0;
          id = std::stoi(key, &used);
          if (used != key.size()) id = -1;
        } catch (const std::exception&) {
        }
        if (id < 0) throw RequestError{400, "invalid_style", "style keys must be instance IDs", "styles." + key};
        selection[id] = parse_selection(value, "styles." + key);
      }
    }
    try {
      styles = sample_styles(*catalog, label, instance, selection, seed);
    } catch (const SelectionError& e) {
      throw RequestError{422, "bad_cluster", e.what(), "styles"};
    }
    for (const auto& [key, v] : styles)
      echo.push_back({{"instance_id", key.instance_id}, {"class_id", key.class_id}, {"vector", v}});
  }

  const Tensor<float> image = labelsynth::synthesize(*model, label, instance, spec.use_encoder ? &styles : nullptr);
  const png::Raster raster{image.h(), image.w(), 3, 8, rgb8_samples(image)};
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {200, nlohmann::json{{"image", {{"png", base64_encode(png::encode(raster))}}},
                              {"height", image.h()},
                              {"width", image.w()},
                              {"seed", seed},
                              {"timing_ms", ms},
                              {"styles", echo}}
                   .dump()};
}

int SynthesisService::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void SynthesisService::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot serve on " + host + ":" + std::to_string(port));
}

void SynthesisService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace labelsynth
