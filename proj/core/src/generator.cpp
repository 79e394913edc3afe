#include "labelsynth/generator.hpp"

#include <algorithm>

#include "labelsynth/error.hpp"

namespace labelsynth {

// ------------------------------------------------------- GlobalGenerator

template <typename T>
GlobalGenerator<T>::GlobalGenerator(const LayerGraph& graph, int input_planes) : graph_(graph) {
  if (graph_.layers.size() < 2 || graph_.layers.back().kind != LayerKind::final_conv)
    throw ShapeError("global generator needs an image head as its last layer");
  const std::size_t n = graph_.layers.size();
  body_ = nn::Network<T>(graph_, input_planes, "g1", 0, n - 1);
  head_ = nn::Network<T>(graph_, body_.output_planes(), "g1", n - 1, n);
}

template <typename T>
typename GlobalGenerator<T>::Output GlobalGenerator<T>::forward(const Tensor<T>& cond, Trace* trace,
                                                                 bool with_head) const {
  Output out;
  out.last_feature = body_.forward(cond, trace ? &trace->body : nullptr);
  if (with_head) out.image = head_.forward(out.last_feature, trace ? &trace->head : nullptr);
  return out;
}

template <typename T>
Tensor<T> GlobalGenerator<T>::backward(const Trace& trace, const Tensor<T>& d_image, const Tensor<T>& d_feature,
                                       bool input_grad) {
  Tensor<T> g;
  if (!d_image.empty()) g = head_.backward(trace.head, d_image);
  if (!d_feature.empty()) {
    if (g.empty()) {
      g = d_feature;
    } else {
      g += d_feature;
    }
  }
  if (g.empty()) return {};
  return body_.backward(trace.body, g, {}, {.param_grads = true, .input_grad = input_grad});
}

template <typename T>
std::vector<nn::Parameter<T>*> GlobalGenerator<T>::parameters() {
  auto p = body_.parameters();
  auto h = head_.parameters();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

// --------------------------------------------------------- LocalEnhancer

namespace {

LayerGraph with_default_fusion(LayerGraph g) {
  if (!g.fusion_point) {
    for (std::size_t i = 0; i < g.layers.size(); ++i)
      if (g.layers[i].kind == LayerKind::down_conv) g.fusion_point = i;
  }
  if (!g.fusion_point) throw ShapeError("local enhancer has no stride-2 layer to fuse after");
  return g;
}

}  // namespace

template <typename T>
LocalEnhancer<T>::LocalEnhancer(const LayerGraph& graph, int input_planes) : graph_(with_default_fusion(graph)) {
  const std::size_t f = *graph_.fusion_point;
  front_ = nn::Network<T>(graph_, input_planes, "g2", 0, f + 1);
  back_ = nn::Network<T>(graph_, front_.output_planes(), "g2", f + 1);
}

template <typename T>
Tensor<T> LocalEnhancer<T>::front(const Tensor<T>& cond, Trace* trace) const {
  return front_.forward(cond, trace ? &trace->front : nullptr);
}

template <typename T>
Tensor<T> LocalEnhancer<T>::back(const Tensor<T>& fused, Trace* trace) const {
  return back_.forward(fused, trace ? &trace->back : nullptr);
}

template <typename T>
Tensor<T> LocalEnhancer<T>::backward_back(const Trace& trace, const Tensor<T>& d_image) {
  return back_.backward(trace.back, d_image);
}

template <typename T>
Tensor<T> LocalEnhancer<T>::backward_front(const Trace& trace, const Tensor<T>& d_front, bool input_grad) {
  return front_.backward(trace.front, d_front, {}, {.param_grads = true, .input_grad = input_grad});
}

template <typename T>
std::vector<nn::Parameter<T>*> LocalEnhancer<T>::parameters() {
  auto p = front_.parameters();
  auto b = back_.parameters();
  p.insert(p.end(), b.begin(), b.end());
  return p;
}

// ------------------------------------------------------------- Generator

template <typename T>
Generator<T>::Generator(const GeneratorSpec& spec)
    : spec_(spec), g1_(scale_width(parse_arch(spec.global_arch), spec.width_divisor), spec.input_planes) {
  if (spec.with_enhancer) {
    g2_.emplace(scale_width(parse_arch(spec.enhancer_arch), spec.width_divisor), spec.input_planes);
    if (g2_->front_planes() != g1_.feature_planes())
      throw ShapeError("fusion planes differ: enhancer front " + std::to_string(g2_->front_planes()) +
                       " vs global feature " + std::to_string(g1_.feature_planes()));
  }
}

template <typename T>
void Generator<T>::set_mode(GeneratorMode m) {
  if (m == GeneratorMode::composed && !g2_) throw ConfigError("composed mode requires a local enhancer");
  mode_ = m;
}

template <typename T>
Tensor<T> Generator<T>::forward_global(const Tensor<T>& cond, Trace* trace) const {
  if (trace) trace->mode = GeneratorMode::global_only;
  return g1_.forward(cond, trace ? &trace->g1 : nullptr).image;
}

template <typename T>
Tensor<T> Generator<T>::forward_composed(const Tensor<T>& cond_full, const Tensor<T>& cond_half,
                                         Trace* trace) const {
  if (!g2_) throw ConfigError("composed forward requires a local enhancer");
  if (cond_half.h() * 2 != cond_full.h() || cond_half.w() * 2 != cond_full.w() || cond_half.n() != cond_full.n())
    throw ShapeError("composed forward: half input " + cond_half.shape_string() + " is not half of " +
                     cond_full.shape_string());
  if (trace) trace->mode = GeneratorMode::composed;
  Tensor<T> fused = g2_->front(cond_full, trace ? &trace->g2 : nullptr);
  const Tensor<T> feature = g1_.forward(cond_half, trace ? &trace->g1 : nullptr, false).last_feature;
  fused.require_same(feature, "fusion");
  fused += feature;
  return g2_->back(fused, trace ? &trace->g2 : nullptr);
}

template <typename T>
Tensor<T> Generator<T>::forward_composed_probe(const Tensor<T>& cond_full, const Tensor<T>& cond_half,
                                               bool zero_front, Tensor<T>* fused_out) const {
  Tensor<T> fused = g2_->front(cond_full, nullptr);
  if (zero_front) fused.fill(T(0));
  fused += g1_.forward(cond_half, nullptr, false).last_feature;
  if (fused_out) *fused_out = fused;
  return g2_->back(fused, nullptr);
}

template <typename T>
typename Generator<T>::InputGrads Generator<T>::backward(const Trace& trace, const Tensor<T>& d_image,
                                                         bool input_grads) {
  InputGrads out;
  if (trace.mode == GeneratorMode::global_only) {
    out.full = g1_.backward(trace.g1, d_image, {}, input_grads);
    return out;
  }
  const Tensor<T> d_fused = g2_->backward_back(trace.g2, d_image);
  out.full = g2_->backward_front(trace.g2, d_fused, input_grads);
  // With G1 frozen and no conditioning gradient requested, nothing upstream needs d_fused.
  if (!g1_.frozen() || input_grads) out.half = g1_.backward(trace.g1, {}, d_fused, input_grads);
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>*> Generator<T>::parameters() {
  auto p = g1_parameters();
  auto q = g2_parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

template <typename T>
int Generator<T>::receptive_field() const {
  const int rf_g1 = labelsynth::receptive_field(g1_.graph());
  if (mode_ == GeneratorMode::global_only || !g2_) return rf_g1;
  // Path through G1 runs at half resolution; path through G2 alone is its own graph.
  LayerGraph front_part = g2_->graph();
  LayerGraph back_part = g2_->graph();
  const std::size_t f = g2_->fusion_point();
  front_part.layers.resize(f + 1);
  back_part.layers.erase(back_part.layers.begin(), back_part.layers.begin() + static_cast<long>(f) + 1);
  // Composite through G1: downsample (x2), G1 body, then G2 back end at half res.
  LayerGraph g1_body = g1_.graph();
  g1_body.layers.pop_back();
  LayerGraph via_g1;
  LayerSpec pool;
  pool.kind = LayerKind::conv;
  pool.kernel = 2;
  pool.stride = {2, 1};
  via_g1.layers.push_back(pool);
  via_g1.layers.insert(via_g1.layers.end(), g1_body.layers.begin(), g1_body.layers.end());
  via_g1.layers.insert(via_g1.layers.end(), back_part.layers.begin(), back_part.layers.end());
  return std::max(labelsynth::receptive_field(g2_->graph()), labelsynth::receptive_field(via_g1));
}

template class GlobalGenerator<float>;
template class GlobalGenerator<double>;
template class LocalEnhancer<float>;
template class LocalEnhancer<double>;
template class Generator<float>;
template class Generator<double>;

}  // namespace labelsynth
