#include "labelsynth/discriminator.hpp"

#include "labelsynth/error.hpp"

namespace labelsynth {

template <typename T>
MultiScaleDiscriminator<T>::MultiScaleDiscriminator(const DiscriminatorSpec& spec)
    : spec_(spec), graph_(scale_width(parse_arch(spec.arch), spec.width_divisor)) {
  if (spec.num_scales < 1) throw ConfigError("need at least one discriminator scale");
  for (int k = 0; k < spec.num_scales; ++k)
    nets_.emplace_back(graph_, spec.cond_planes + 3, "d" + std::to_string(k + 1));
}

template <typename T>
DiscriminatorOutput<T> MultiScaleDiscriminator<T>::forward(int k, const Tensor<T>& cond, const Tensor<T>& image,
                                                           Trace* trace) const {
  if (k < 0 || k >= num_scales()) throw ShapeError("discriminator scale " + std::to_string(k) + " out of range");
  if (cond.c() != spec_.cond_planes)
    throw ShapeError("discriminator expects " + std::to_string(spec_.cond_planes) + " conditioning planes, got " +
                     std::to_string(cond.c()));
  if (image.c() != 3) throw ShapeError("discriminator image must have 3 planes, got " + image.shape_string());
  Trace local;
  Trace* t = trace ? trace : &local;
  DiscriminatorOutput<T> out;
  out.score_map = nets_[static_cast<std::size_t>(k)].forward(concat_planes(cond, image), t);
  out.features = t->outputs;
  return out;
}

template <typename T>
std::vector<DiscriminatorOutput<T>> MultiScaleDiscriminator<T>::multiscale_forward(
    const std::vector<Tensor<T>>& cond_pyramid, const std::vector<Tensor<T>>& image_pyramid) const {
  if (cond_pyramid.size() != image_pyramid.size() || static_cast<int>(image_pyramid.size()) != num_scales())
    throw ShapeError("pyramid level count mismatch: cond " + std::to_string(cond_pyramid.size()) + ", image " +
                     std::to_string(image_pyramid.size()) + ", scales " + std::to_string(num_scales()));
  std::vector<DiscriminatorOutput<T>> out;
  for (int k = 0; k < num_scales(); ++k) out.push_back(forward(k, cond_pyramid[k], image_pyramid[k]));
  return out;
}

template <typename T>
Tensor<T> MultiScaleDiscriminator<T>::backward(int k, const Trace& trace, const Tensor<T>& d_score,
                                               std::span<const Tensor<T>> d_features, bool param_grads,
                                               bool image_grad) {
  Tensor<T> d_in = nets_.at(static_cast<std::size_t>(k))
                       .backward(trace, d_score, d_features, {.param_grads = param_grads, .input_grad = image_grad});
  if (!image_grad || d_in.empty()) return {};
  return take_planes(d_in, spec_.cond_planes, 3);
}

template <typename T>
std::vector<nn::Parameter<T>*> MultiScaleDiscriminator<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  for (auto& n : nets_) {
    auto p = n.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template class MultiScaleDiscriminator<float>;
template class MultiScaleDiscriminator<double>;

}  // namespace labelsynth
