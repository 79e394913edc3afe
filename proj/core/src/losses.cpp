#include "labelsynth/losses.hpp"

#include <cmath>

#include "labelsynth/error.hpp"

namespace labelsynth {

void LossWeights::validate() const {
  if (lambda_fm < 0 || lambda_perc < 0) throw ConfigError("loss weights must be non-negative");
}

void finalize_report(LossReport& r, const LossWeights& w) {
  auto sum = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s;
  };
  r.g_gan_total = sum(r.g_gan);
  r.g_fm_total = sum(r.g_fm);
  r.d_real_total = sum(r.d_real);
  r.d_fake_total = sum(r.d_fake);
  r.g_total = r.g_gan_total + w.lambda_fm * r.g_fm_total + w.lambda_perc * r.g_perc;
  r.d_total = r.d_real_total + r.d_fake_total;
}

namespace {

template <typename T>
double half_mse(const Tensor<T>& s, double target, Tensor<T>* grad, double scale) {
  if (s.empty()) throw ShapeError("empty score map");
  const double n = static_cast<double>(s.size());
  double acc = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = static_cast<double>(s[i]) - target;
    acc += d * d;
  }
  if (grad) {
    if (!grad->same_shape(s)) *grad = Tensor<T>(s.n(), s.h(), s.w(), s.c());
    for (std::size_t i = 0; i < s.size(); ++i)
      (*grad)[i] += static_cast<T>(scale * (static_cast<double>(s[i]) - target) / n);
  }
  return 0.5 * acc / n;
}

}  // namespace

template <typename T>
double lsgan_d_loss(const Tensor<T>& score_real, const Tensor<T>& score_fake, Tensor<T>* grad_real,
                    Tensor<T>* grad_fake, double scale, double real_target, double fake_target) {
  if (!score_real.same_shape(score_fake))
    throw ShapeError("lsgan_d_loss: " + score_real.shape_string() + " vs " + score_fake.shape_string());
  return half_mse(score_real, real_target, grad_real, scale) + half_mse(score_fake, fake_target, grad_fake, scale);
}

template <typename T>
double lsgan_g_loss(const Tensor<T>& score_fake, Tensor<T>* grad, double scale, double real_target) {
  return half_mse(score_fake, real_target, grad, scale);
}

template <typename T>
double lsgan_d_loss(const std::vector<Tensor<T>>& real, const std::vector<Tensor<T>>& fake) {
  if (real.size() != fake.size()) throw ShapeError("lsgan_d_loss: scale count mismatch");
  double total = 0;
  for (std::size_t k = 0; k < real.size(); ++k) total += lsgan_d_loss(real[k], fake[k]);
  return total;
}

template <typename T>
double lsgan_g_loss(const std::vector<Tensor<T>>& fake) {
  double total = 0;
  for (const auto& f : fake) total += lsgan_g_loss(f);
  return total;
}

template <typename T>
double layer_l1_loss(const std::vector<Tensor<T>>& real, const std::vector<Tensor<T>>& fake,
                     std::vector<Tensor<T>>* grad_fake, double scale) {
  if (real.size() != fake.size())
    throw ShapeError("layer L1: " + std::to_string(real.size()) + " vs " + std::to_string(fake.size()) + " taps");
  if (grad_fake) grad_fake->resize(fake.size());
  double total = 0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const Tensor<T>& r = real[i];
    const Tensor<T>& f = fake[i];
    r.require_same(f, "layer L1 tap");
    const double n = static_cast<double>(r.size());
    double acc = 0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += std::abs(static_cast<double>(r[j]) - static_cast<double>(f[j]));
    total += acc / n;
    if (grad_fake) {
      Tensor<T>& g = (*grad_fake)[i];
      if (!g.same_shape(f)) g = Tensor<T>(f.n(), f.h(), f.w(), f.c());
      const T step = static_cast<T>(scale / n);
      for (std::size_t j = 0; j < f.size(); ++j) {
        if (f[j] > r[j]) {
          g[j] += step;
        } else if (f[j] < r[j]) {
          g[j] -= step;
        }
      }
    }
  }
  return total;
}

template <typename T>
double feature_matching_loss(const std::vector<std::vector<Tensor<T>>>& real,
                             const std::vector<std::vector<Tensor<T>>>& fake) {
  if (real.size() != fake.size()) throw ShapeError("feature matching: scale count mismatch");
  double total = 0;
  for (std::size_t k = 0; k < real.size(); ++k) total += layer_l1_loss(real[k], fake[k]);
  return total;
}

#define LABELSYNTH_INSTANTIATE(T)                                                                             \
  template double lsgan_d_loss<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>*, double, double, \
                                  double);                                                                    \
  template double lsgan_g_loss<T>(const Tensor<T>&, Tensor<T>*, double, double);                              \
  template double lsgan_d_loss<T>(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&);              \
  template double lsgan_g_loss<T>(const std::vector<Tensor<T>>&);                                             \
  template double layer_l1_loss<T>(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&,              \
                                   std::vector<Tensor<T>>*, double);                                          \
  template double feature_matching_loss<T>(const std::vector<std::vector<Tensor<T>>>&,                        \
                                           const std::vector<std::vector<Tensor<T>>>&);

LABELSYNTH_INSTANTIATE(float)
LABELSYNTH_INSTANTIATE(double)
#undef LABELSYNTH_INSTANTIATE

}  // namespace labelsynth

namespace labelsynth {

template <typename T>
double perceptual_loss(const Tensor<T>& x, const Tensor<T>& g_s, nn::Network<T>& net, int taps, Tensor<T>* grad_gs,
                       double scale) {
  x.require_same(g_s, "perceptual loss");
  if (taps < 1 || static_cast<std::size_t>(taps) > net.block_count())
    throw ShapeError("perceptual loss: " + std::to_string(taps) + " taps on a " + std::to_string(net.block_count()) +
                     "-block network");
  typename nn::Network<T>::Trace tx, tg;
  net.forward(x, &tx);
  net.forward(g_s, &tg);
  const std::vector<Tensor<T>> fx(tx.outputs.begin(), tx.outputs.begin() + taps);
  const std::vector<Tensor<T>> fg(tg.outputs.begin(), tg.outputs.begin() + taps);
  if (!grad_gs) return layer_l1_loss(fx, fg);
  std::vector<Tensor<T>> tap_grads;
  const double loss = layer_l1_loss(fx, fg, &tap_grads, scale);
  Tensor<T> d = net.backward(tg, Tensor<T>{}, tap_grads, {.param_grads = false, .input_grad = true});
  if (grad_gs->same_shape(d)) {
    *grad_gs += d;
  } else {
    *grad_gs = std::move(d);
  }
  return loss;
}

template double perceptual_loss<float>(const Tensor<float>&, const Tensor<float>&, nn::Network<float>&, int,
                                       Tensor<float>*, double);
template double perceptual_loss<double>(const Tensor<double>&, const Tensor<double>&, nn::Network<double>&, int,
                                        Tensor<double>*, double);

}  // namespace labelsynth
