#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/model.hpp"
#include "labelsynth/style_catalog.hpp"

namespace labelsynth {

struct ServiceOptions {
  int max_height = 256;
  int max_width = 512;
  /// Synthesis requests running at once; further requests wait for a slot.
  int compute_slots = 2;
  /// Synthesis requests admitted (running + waiting); beyond this the server answers 429.
  int queue_capacity = 8;
  int http_threads = 8;
  std::string static_dir;  // served at "/" when set
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// JSON-over-HTTP synthesis endpoint. The model and catalog are immutable once
/// loaded; handlers may run concurrently.
///
///   POST /synthesize   {"label": MAP, "instance": MAP, "styles": {ID: STYLE}, "seed": N}
///                      MAP   = {"png": base64} | {"rle": {"height", "width", "runs": [[value, count], ...]}}
///                      STYLE = {"cluster": k} | {"vector": [a, b, c]} | "random"
///                   -> {"image": {"png": base64}, "height", "width", "seed", "timing_ms", "styles": [...]}
///   GET  /styles?class=k -> {"class", "centers", "counts"}
///   GET  /health         -> {"status": "loading" | "ok"}
///   GET  /meta           -> {"num_classes", "arch", "max_height", "max_width", ...}
/// Errors carry {"code", "message", "field"}.
class SynthesisService {
 public:
  explicit SynthesisService(ServiceOptions options = {});
  ~SynthesisService();
  SynthesisService(const SynthesisService&) = delete;
  SynthesisService& operator=(const SynthesisService&) = delete;

  /// Installs the model (and catalog, required for encoder models). Call once.
  void load(GanModel<float> model, std::optional<StyleCatalog> catalog, nlohmann::json manifest = {});
  bool loaded() const;

  HttpReply synthesize(const std::string& body);
  HttpReply styles(const std::optional<std::string>& class_param) const;
  HttpReply health() const;
  HttpReply meta() const;

  /// Binds and serves on a background thread; returns the bound port
  /// (pass 0 for an ephemeral one). Throws Error when binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Base64 (RFC 4648, padded) helpers used for PNG payloads.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws Error on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Run-length encoding of a row-major integer grid: [[value, count], ...].
nlohmann::json rle_encode(const std::vector<int32_t>& grid, int height, int width);

}  // namespace labelsynth
