#include "labelsynth/objective.hpp"

#include <algorithm>

#include "labelsynth/error.hpp"

namespace labelsynth {

namespace {

template <typename T>
Tensor<T> cond_tensor(const LabelMap& label, const InstanceMap& instance, bool use_instance_maps) {
  return build_conditioning(label, instance, nullptr, use_instance_maps).planes.template cast<T>();
}

int max_scale(const std::vector<int>& scales) {
  if (scales.empty()) throw ConfigError("no active discriminator scales");
  return *std::max_element(scales.begin(), scales.end());
}

template <typename T>
void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite ") + what);
}

}  // namespace

template <typename T>
StepInput<T> make_step_input(const std::vector<const LabelMap*>& labels,
                             const std::vector<const InstanceMap*>& instances,
                             const std::vector<const Tensor<float>*>& images, bool half_resolution, bool composed,
                             bool use_instance_maps) {
  if (labels.size() != instances.size() || labels.size() != images.size() || labels.empty())
    throw ShapeError("make_step_input: mismatched batch lists");
  StepInput<T> in;
  in.composed = composed;
  std::vector<Tensor<T>> conds, reals, halves;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    LabelMap label = *labels[i];
    InstanceMap inst = *instances[i];
    Tensor<T> image = images[i]->template cast<T>();
    if (half_resolution) {
      label = downsample_nearest(label);
      inst = downsample_nearest(inst);
      image = avg_pool2(image);
    }
    conds.push_back(cond_tensor<T>(label, inst, use_instance_maps));
    reals.push_back(std::move(image));
    in.regions.push_back(RegionIndex::build(label, inst));
    if (composed) {
      const LabelMap lh = downsample_nearest(label);
      const InstanceMap ih = downsample_nearest(inst);
      halves.push_back(cond_tensor<T>(lh, ih, use_instance_maps));
      in.regions_half.push_back(RegionIndex::build(lh, ih));
    }
  }
  in.cond = stack_batch<T>(conds);
  in.real = stack_batch<T>(reals);
  if (composed) in.cond_half = stack_batch<T>(halves);
  return in;
}

template <typename T>
GanObjective<T>::GanObjective(GanModel<T>& model, LossWeights weights, nn::Network<T>* feature_net, int feature_taps)
    : model_(model), weights_(weights), feature_net_(feature_net), feature_taps_(feature_taps) {
  weights_.validate();
}

template <typename T>
Tensor<T> GanObjective<T>::generator_input(const Tensor<T>& cond, const std::vector<RegionIndex>& regions,
                                           const std::vector<RegionVectors<T>>& means,
                                           const std::vector<RegionIndex>& top) const {
  if (!model_.encoder) return cond;
  Tensor<T> feat(cond.n(), cond.h(), cond.w(), 3);
  for (int n = 0; n < cond.n(); ++n) {
    const RegionIndex& r = regions[static_cast<std::size_t>(n)];
    const RegionIndex& t = top[static_cast<std::size_t>(n)];
    const RegionVectors<T>& m = means[static_cast<std::size_t>(n)];
    std::vector<int> to_top(r.keys.size());
    for (std::size_t k = 0; k < r.keys.size(); ++k) to_top[k] = t.find(r.keys[k]);
    T* dst = feat.sample(n);
    for (std::size_t p = 0; p < r.region_of_pixel.size(); ++p) {
      const auto& v = m[static_cast<std::size_t>(to_top[static_cast<std::size_t>(r.region_of_pixel[p])])];
      std::copy(v.begin(), v.end(), dst + p * 3);
    }
  }
  return concat_planes(cond, feat);
}

template <typename T>
void GanObjective<T>::forward_generator(const StepInput<T>& in, State& s, bool keep_trace) const {
  s.has_trace = keep_trace;
  s.real_features.clear();
  s.style_means.clear();
  if (model_.encoder)
    s.style_means = model_.encoder->encode_regions(in.real, in.regions, keep_trace ? &s.e_trace : nullptr);
  const Tensor<T> g_in = generator_input(in.cond, in.regions, s.style_means, in.regions);
  auto* trace = keep_trace ? &s.g_trace : nullptr;
  if (in.composed) {
    const Tensor<T> g_half = generator_input(in.cond_half, in.regions_half, s.style_means, in.regions);
    s.fake = model_.generator.forward_composed(g_in, g_half, trace);
  } else {
    s.fake = model_.generator.forward_global(g_in, trace);
  }
}

template <typename T>
void GanObjective<T>::build_pyramids(const StepInput<T>& in, State& s, int levels) const {
  s.cond_pyramid = {in.cond};
  s.real_pyramid = {in.real};
  for (int k = 1; k < levels; ++k) {
    s.cond_pyramid.push_back(avg_pool2(s.cond_pyramid.back()));
    s.real_pyramid.push_back(avg_pool2(s.real_pyramid.back()));
  }
}

template <typename T>
void GanObjective<T>::record_real_features(const StepInput<T>& in, State& s, const std::vector<int>& scales) const {
  build_pyramids(in, s, max_scale(scales) + 1);
  s.real_features.assign(static_cast<std::size_t>(model_.discriminator.num_scales()), {});
  for (int k : scales)
    s.real_features[static_cast<std::size_t>(k)] =
        model_.discriminator.forward(k, s.cond_pyramid[static_cast<std::size_t>(k)],
                                     s.real_pyramid[static_cast<std::size_t>(k)])
            .features;
}

template <typename T>
void GanObjective<T>::d_step(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport& report) {
  auto params = model_.discriminator_parameters();
  nn::zero_grads<T>(params);
  const int levels = max_scale(scales) + 1;
  build_pyramids(in, s, levels);
  std::vector<Tensor<T>> fake_pyramid = {s.fake};
  for (int k = 1; k < levels; ++k) fake_pyramid.push_back(avg_pool2(fake_pyramid.back()));

  report.d_real.clear();
  report.d_fake.clear();
  s.real_features.assign(static_cast<std::size_t>(model_.discriminator.num_scales()), {});
  for (int k : scales) {
    const auto ks = static_cast<std::size_t>(k);
    typename MultiScaleDiscriminator<T>::Trace tr, tf;
    auto out_r = model_.discriminator.forward(k, s.cond_pyramid[ks], s.real_pyramid[ks], &tr);
    auto out_f = model_.discriminator.forward(k, s.cond_pyramid[ks], fake_pyramid[ks], &tf);
    Tensor<T> gr, gf;
    // The two halves of lsgan_d_loss, kept apart for the report.
    const double real_term = lsgan_g_loss(out_r.score_map, &gr, 1.0, weights_.real_target);
    const double fake_term = lsgan_g_loss(out_f.score_map, &gf, 1.0, weights_.fake_target);
    require_finite<T>(real_term + fake_term, "discriminator loss");
    report.d_real.push_back(real_term);
    report.d_fake.push_back(fake_term);
    model_.discriminator.backward(k, tr, gr, {}, true, false);
    model_.discriminator.backward(k, tf, gf, {}, true, false);
    s.real_features[ks] = std::move(out_r.features);
  }
  finalize_report(report, weights_);
}

template <typename T>
double GanObjective<T>::g_loss(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport* report,
                               bool with_grad) {
  const int levels = max_scale(scales) + 1;
  if (s.cond_pyramid.size() < static_cast<std::size_t>(levels)) build_pyramids(in, s, levels);
  std::vector<Tensor<T>> fake_pyramid = {s.fake};
  for (int k = 1; k < levels; ++k) fake_pyramid.push_back(avg_pool2(fake_pyramid.back()));
  std::vector<Tensor<T>> d_fake_levels(static_cast<std::size_t>(levels));

  LossReport local;
  LossReport& r = report ? *report : local;
  r.g_gan.clear();
  r.g_fm.clear();
  r.g_perc = 0;
  for (int k : scales) {
    const auto ks = static_cast<std::size_t>(k);
    if (s.real_features.size() <= ks || s.real_features[ks].empty())
      throw Error("g-step needs real features recorded for scale " + std::to_string(k));
    typename MultiScaleDiscriminator<T>::Trace tr;
    auto out = model_.discriminator.forward(k, s.cond_pyramid[ks], fake_pyramid[ks], with_grad ? &tr : nullptr);
    Tensor<T> g_score;
    std::vector<Tensor<T>> g_taps;
    const double gan = lsgan_g_loss(out.score_map, with_grad ? &g_score : nullptr, 1.0, weights_.real_target);
    double fm = 0;
    if (weights_.lambda_fm > 0 || report) {
      fm = layer_l1_loss(s.real_features[ks], out.features,
                         with_grad && weights_.lambda_fm > 0 ? &g_taps : nullptr, weights_.lambda_fm);
    }
    r.g_gan.push_back(gan);
    r.g_fm.push_back(fm);
    if (with_grad) d_fake_levels[ks] = model_.discriminator.backward(k, tr, g_score, g_taps, false, true);
  }

  Tensor<T> d_fake;
  if (with_grad) {
    for (int k = levels - 1; k >= 0; --k) {
      const auto ks = static_cast<std::size_t>(k);
      if (k < levels - 1 && !d_fake.empty()) d_fake = avg_pool2_backward(d_fake);
      if (!d_fake_levels[ks].empty()) {
        if (d_fake.empty()) {
          d_fake = d_fake_levels[ks];
        } else {
          d_fake += d_fake_levels[ks];
        }
      }
    }
  }
  if (weights_.lambda_perc > 0 && feature_net_) {
    r.g_perc = perceptual_loss(in.real, s.fake, *feature_net_, feature_taps_, with_grad ? &d_fake : nullptr,
                               weights_.lambda_perc);
  }
  finalize_report(r, weights_);
  require_finite<T>(r.g_total, "generator loss");

  if (with_grad) {
    const bool need_cond_grad = model_.encoder.has_value();
    const auto grads = model_.generator.backward(s.g_trace, d_fake, need_cond_grad);
    if (need_cond_grad && !model_.encoder->frozen()) {
      const int C = model_.spec.cond_planes();
      std::vector<RegionVectors<T>> d_means;
      for (int n = 0; n < in.batch(); ++n) {
        const auto ns = static_cast<std::size_t>(n);
        RegionVectors<T> dm = region_sums(grads.full.sample(n), grads.full.c(), C, in.regions[ns]);
        if (in.composed && !grads.half.empty()) {
          const RegionVectors<T> dh = region_sums(grads.half.sample(n), grads.half.c(), C, in.regions_half[ns]);
          for (std::size_t k = 0; k < dh.size(); ++k) {
            const int top = in.regions[ns].find(in.regions_half[ns].keys[k]);
            for (int c = 0; c < 3; ++c) dm[static_cast<std::size_t>(top)][static_cast<std::size_t>(c)] += dh[k][static_cast<std::size_t>(c)];
          }
        }
        d_means.push_back(std::move(dm));
      }
      model_.encoder->backward(s.e_trace, d_means, in.regions);
    }
  }
  return r.g_total;
}

template <typename T>
void GanObjective<T>::g_step(const StepInput<T>& in, State& s, const std::vector<int>& scales, LossReport& report) {
  if (!s.has_trace) throw Error("g-step needs a traced generator forward pass");
  auto params = model_.generator_parameters();
  nn::zero_grads<T>(params);
  LossReport g;
  g_loss(in, s, scales, &g, true);
  report.g_gan = g.g_gan;
  report.g_fm = g.g_fm;
  report.g_perc = g.g_perc;
  finalize_report(report, weights_);
}

template <typename T>
double GanObjective<T>::g_objective(const StepInput<T>& in, const std::vector<int>& scales) {
  State s;
  forward_generator(in, s, false);
  record_real_features(in, s, scales);
  return g_loss(in, s, scales, nullptr, false);
}

#define LABELSYNTH_INSTANTIATE(T)                                                                                \
  template StepInput<T> make_step_input<T>(const std::vector<const LabelMap*>&,                                  \
                                           const std::vector<const InstanceMap*>&,                               \
                                           const std::vector<const Tensor<float>*>&, bool, bool, bool);          \
  template class GanObjective<T>;

LABELSYNTH_INSTANTIATE(float)
LABELSYNTH_INSTANTIATE(double)
#undef LABELSYNTH_INSTANTIATE

}  // namespace labelsynth
