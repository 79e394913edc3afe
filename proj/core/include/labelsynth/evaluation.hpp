#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelsynth/bundle.hpp"
#include "labelsynth/dataset.hpp"
#include "labelsynth/style_catalog.hpp"

namespace labelsynth {

struct SegScores {
  double pixel_accuracy = 0;
  double mean_iou = 0;
  std::vector<std::optional<double>> per_class_iou;  // empty when the class is absent from both maps
  std::int64_t pixels = 0;

  nlohmann::json to_json() const;
};

/// Accumulates (truth, predicted) pixel pairs across any number of maps.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);
  void add(const LabelMap& predicted, const LabelMap& truth);
  std::int64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(c_) + static_cast<std::size_t>(predicted)];
  }
  int num_classes() const { return c_; }
  /// Mean IoU is taken over classes present in either map.
  SegScores scores() const;

 private:
  int c_;
  std::vector<std::int64_t> counts_;
};

SegScores seg_scores(const LabelMap& predicted, const LabelMap& truth);

/// Small fully convolutional segmenter standing in for an off-the-shelf model.
/// Built from the notation with every normalization removed. Its first five
/// blocks double as the perceptual feature network.
std::string oracle_arch(int num_classes);

struct OracleOptions {
  int epochs = 4;
  int batch_size = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

class OracleSegmenter {
 public:
  explicit OracleSegmenter(int num_classes, const std::string& arch = "");

  /// Per-pixel class scores, (n, h, w, C).
  Tensor<float> logits(const Tensor<float>& images) const;
  LabelMap segment(const Tensor<float>& image) const;

  Bundle to_bundle() const;
  static OracleSegmenter from_bundle(const Bundle& b);
  void save(const std::string& path) const { save_bundle(path, to_bundle()); }
  static OracleSegmenter load(const std::string& path) { return from_bundle(load_bundle(path)); }

  int num_classes;
  std::string arch;
  nn::Network<float> net;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Mean per-pixel softmax cross-entropy; `grad` receives d(loss)/d(logits).
double softmax_cross_entropy(const Tensor<float>& logits, const std::vector<const LabelMap*>& truth,
                             Tensor<float>* grad = nullptr);

/// Trains from He-normal init with Adam; deterministic under `options.seed`.
OracleSegmenter train_oracle(const Dataset& train, const OracleOptions& options,
                             const std::function<void(int epoch, double loss)>& progress = {});

/// Oracle scores on the dataset's real images.
SegScores score_real_images(const OracleSegmenter& oracle, const Dataset& dataset);

struct EvalOptions {
  /// With an encoder model: styles drawn from this catalog under `style_seed`;
  /// without a catalog each sample's own encoded styles are used.
  const StyleCatalog* catalog = nullptr;
  std::uint64_t style_seed = 0;
};

struct EvalReport {
  SegScores synthesized;
  SegScores real;  // oracle reference on the real images
  std::size_t samples = 0;

  nlohmann::json to_json() const;
};

/// Synthesizes from every label/instance pair, segments the result with the
/// oracle, and scores against the input label maps.
EvalReport evaluate_model(const GanModel<float>& model, const Dataset& dataset, const OracleSegmenter& oracle,
                          const EvalOptions& options = {});

struct AblationRow {
  std::string name;
  EvalReport report;
};

std::vector<AblationRow> ablation_compare(const std::vector<std::pair<std::string, const GanModel<float>*>>& models,
                                          const Dataset& dataset, const OracleSegmenter& oracle,
                                          const EvalOptions& options = {});
nlohmann::json ablation_table_json(const std::vector<AblationRow>& rows);
/// Fixed-width text table: variant, pixel accuracy, mean IoU.
std::string ablation_table_text(const std::vector<AblationRow>& rows);

}  // namespace labelsynth
