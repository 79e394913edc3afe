#include "labelsynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "labelsynth/synthesis.hpp"

namespace labelsynth {

nlohmann::json SegScores::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : per_class_iou) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"pixel_accuracy", pixel_accuracy}, {"mean_iou", mean_iou}, {"per_class_iou", per}, {"pixels", pixels}};
}

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : c_(num_classes), counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0) {
  if (num_classes < 1) throw Error("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(const LabelMap& predicted, const LabelMap& truth) {
  if (predicted.height != truth.height || predicted.width != truth.width)
    throw ShapeError("seg scores: predicted " + std::to_string(predicted.height) + "x" + std::to_string(predicted.width) +
                     " vs truth " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  for (std::size_t i = 0; i < truth.grid.size(); ++i) {
    const int t = truth.grid[i], p = predicted.grid[i];
    if (t < 0 || t >= c_ || p < 0 || p >= c_) throw InvalidLabelError("class ID outside confusion matrix");
    ++counts_[static_cast<std::size_t>(t) * static_cast<std::size_t>(c_) + static_cast<std::size_t>(p)];
  }
}

SegScores ConfusionMatrix::scores() const {
  SegScores s;
  std::int64_t correct = 0, total = 0;
  std::vector<std::int64_t> row(static_cast<std::size_t>(c_), 0), col(static_cast<std::size_t>(c_), 0);
  for (int t = 0; t < c_; ++t)
    for (int p = 0; p < c_; ++p) {
      const std::int64_t n = at(t, p);
      total += n;
      if (t == p) correct += n;
      row[static_cast<std::size_t>(t)] += n;
      col[static_cast<std::size_t>(p)] += n;
    }
  s.pixels = total;
  s.pixel_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  double sum = 0;
  int present = 0;
  for (int c = 0; c < c_; ++c) {
    const std::int64_t inter = at(c, c);
    const std::int64_t uni = row[static_cast<std::size_t>(c)] + col[static_cast<std::size_t>(c)] - inter;
    if (uni == 0) {
      s.per_class_iou.emplace_back();
      continue;
    }
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    s.per_class_iou.emplace_back(iou);
    sum += iou;
    ++present;
  }
  s.mean_iou = present ? sum / present : 0.0;
  return s;
}

SegScores seg_scores(const LabelMap& predicted, const LabelMap& truth) {
  ConfusionMatrix m(std::max({truth.num_classes, predicted.num_classes, 1}));
  m.add(predicted, truth);
  return m.scores();
}

std::string oracle_arch(int num_classes) { return "c5s1-16,d32,d64,u32,u16,h1-" + std::to_string(num_classes); }

OracleSegmenter::OracleSegmenter(int classes, const std::string& a)
    : num_classes(classes), arch(a.empty() ? oracle_arch(classes) : a) {
  LayerGraph g = parse_arch(arch);
  // Normalization would discard the absolute colour the classes are told apart by.
  for (auto& l : g.layers) l.norm = Norm::none;
  if (g.output_planes() != num_classes)
    throw ShapeError("oracle architecture outputs " + std::to_string(g.output_planes()) + " planes, expected " +
                     std::to_string(num_classes));
  net = nn::Network<float>(g, 3, "oracle");
}

Tensor<float> OracleSegmenter::logits(const Tensor<float>& images) const { return net.forward(images); }

LabelMap OracleSegmenter::segment(const Tensor<float>& image) const {
  const Tensor<float> z = logits(image);
  LabelMap out(z.h(), z.w(), num_classes);
  for (std::size_t p = 0; p < out.grid.size(); ++p) {
    const float* v = z.data() + p * static_cast<std::size_t>(num_classes);
    out.grid[p] = static_cast<int32_t>(std::max_element(v, v + num_classes) - v);
  }
  return out;
}

Bundle OracleSegmenter::to_bundle() const {
  Bundle b;
  b.manifest = {{"format", "labelsynth-oracle"}, {"arch", arch}, {"num_classes", num_classes}, {"provenance", provenance}};
  for (auto* p : const_cast<nn::Network<float>&>(net).parameters()) b.arrays.push_back({p->name, p->shape, {p->value.begin(), p->value.end()}});
  return b;
}

OracleSegmenter OracleSegmenter::from_bundle(const Bundle& b) {
  if (b.manifest.value("format", "") != "labelsynth-oracle") throw IntegrityError("bundle is not an oracle segmenter");
  OracleSegmenter o(b.manifest.at("num_classes").get<int>(), b.manifest.at("arch").get<std::string>());
  o.provenance = b.manifest.value("provenance", nlohmann::json::object());
  for (auto* p : o.net.parameters()) {
    const NamedArray* a = b.find(p->name);
    if (!a || a->shape != p->shape) throw ShapeError("oracle parameter " + p->name + " missing or mis-shaped");
    p->value.assign(a->data.begin(), a->data.end());
  }
  return o;
}

double softmax_cross_entropy(const Tensor<float>& logits, const std::vector<const LabelMap*>& truth,
                             Tensor<float>* grad) {
  const int C = logits.c();
  if (static_cast<std::size_t>(logits.n()) != truth.size()) throw ShapeError("cross entropy: batch mismatch");
  const std::size_t pixels = static_cast<std::size_t>(logits.h()) * logits.w();
  const double inv = 1.0 / static_cast<double>(pixels * truth.size());
  if (grad) *grad = Tensor<float>(logits.n(), logits.h(), logits.w(), C);
  double loss = 0;
  std::vector<double> prob(static_cast<std::size_t>(C));
  for (int n = 0; n < logits.n(); ++n) {
    const LabelMap& t = *truth[static_cast<std::size_t>(n)];
    if (t.grid.size() != pixels) throw ShapeError("cross entropy: label dims differ from logits");
    for (std::size_t p = 0; p < pixels; ++p) {
      const float* z = logits.sample(n) + p * static_cast<std::size_t>(C);
      const float zmax = *std::max_element(z, z + C);
      double sum = 0;
      for (int c = 0; c < C; ++c) sum += prob[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(z[c] - zmax));
      const int label = t.grid[p];
      loss -= std::log(prob[static_cast<std::size_t>(label)] / sum);
      if (grad) {
        float* g = grad->sample(n) + p * static_cast<std::size_t>(C);
        for (int c = 0; c < C; ++c)
          g[c] = static_cast<float>((prob[static_cast<std::size_t>(c)] / sum - (c == label ? 1.0 : 0.0)) * inv);
      }
    }
  }
  return loss * inv;
}

OracleSegmenter train_oracle(const Dataset& train, const OracleOptions& options,
                             const std::function<void(int, double)>& progress) {
  if (train.empty()) throw ConfigError("oracle training set is empty");
  OracleSegmenter oracle(train.num_classes);
  auto params = oracle.net.parameters();
  std::mt19937_64 rng(options.seed);
  // He initialization: without normalization the 0.02 GAN init starves deep layers.
  for (auto* p : params) {
    std::fill(p->value.begin(), p->value.end(), 0.0f);
    if (p->shape.size() == 1) continue;
    const double fan_in = static_cast<double>(p->value.size()) / static_cast<double>(p->shape.back());
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : p->value) v = static_cast<float>(dist(rng));
  }
  nn::Adam<float> opt(params, 0.9, 0.999);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double sum = 0;
    std::size_t batches = 0;
    for (const auto& idx : iterate_batches(train.size(), static_cast<std::size_t>(options.batch_size),
                                           options.seed * 7919ull + static_cast<std::uint64_t>(epoch))) {
      std::vector<Tensor<float>> images;
      std::vector<const LabelMap*> labels;
      for (std::size_t i : idx) {
        images.push_back(train.samples[i].image);
        labels.push_back(&train.samples[i].label);
      }
      const Tensor<float> x = stack_batch<float>(images);
      nn::Network<float>::Trace trace;
      const Tensor<float> z = oracle.net.forward(x, &trace);
      Tensor<float> dz;
      sum += softmax_cross_entropy(z, labels, &dz);
      ++batches;
      nn::zero_grads<float>(params);
      oracle.net.backward(trace, dz, {}, {.param_grads = true, .input_grad = false});
      opt.step(options.lr);
    }
    if (progress) progress(epoch, sum / static_cast<double>(std::max<std::size_t>(1, batches)));
  }
  oracle.provenance = {{"train_samples", train.size()}, {"epochs", options.epochs}, {"seed", options.seed},
                       {"lr", options.lr}, {"batch_size", options.batch_size}};
  return oracle;
}

SegScores score_real_images(const OracleSegmenter& oracle, const Dataset& dataset) {
  ConfusionMatrix m(oracle.num_classes);
  for (const auto& s : dataset.samples) m.add(oracle.segment(s.image), s.label);
  return m.scores();
}

nlohmann::json EvalReport::to_json() const {
  return {{"samples", samples}, {"synthesized", synthesized.to_json()}, {"real", real.to_json()}};
}

EvalReport evaluate_model(const GanModel<float>& model, const Dataset& dataset, const OracleSegmenter& oracle,
                          const EvalOptions& options) {
  if (oracle.num_classes != model.spec.num_classes) throw ConfigError("oracle and model class counts differ");
  ConfusionMatrix synth(oracle.num_classes), real(oracle.num_classes);
  for (const auto& s : dataset.samples) {
    StyleVectors styles;
    if (model.spec.use_encoder)
      styles = options.catalog ? sample_styles(*options.catalog, s.label, s.instance, {}, options.style_seed)
                               : encode_styles(model, s);
    const Tensor<float> image = synthesize(model, s.label, s.instance, model.spec.use_encoder ? &styles : nullptr);
    synth.add(oracle.segment(image), s.label);
    real.add(oracle.segment(s.image), s.label);
  }
  return {synth.scores(), real.scores(), dataset.size()};
}

std::vector<AblationRow> ablation_compare(const std::vector<std::pair<std::string, const GanModel<float>*>>& models,
                                          const Dataset& dataset, const OracleSegmenter& oracle,
                                          const EvalOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& [name, model] : models) rows.push_back({name, evaluate_model(*model, dataset, oracle, options)});
  return rows;
}

nlohmann::json ablation_table_json(const std::vector<AblationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"variant", r.name}, {"report", r.report.to_json()}});
  return out;
}

std::string ablation_table_text(const std::vector<AblationRow>& rows) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %9s  %8s\n", static_cast<int>(width), "variant", "pixel_acc", "mean_iou");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %9.4f  %8.4f\n", static_cast<int>(width), r.name.c_str(),
                  r.report.synthesized.pixel_accuracy, r.report.synthesized.mean_iou);
    out += line;
  }
  return out;
}

}  // namespace labelsynth
