#pragma once

#include <vector>

#include "labelsynth/nn.hpp"
#include "labelsynth/tensor.hpp"

namespace labelsynth {

struct LossWeights {
  double lambda_fm = 10.0;
  double lambda_perc = 0.0;  // 0 disables the perceptual term
  double real_target = 1.0;
  double fake_target = 0.0;

  /// Throws ConfigError on negative weights.
  void validate() const;
};

/// Per-scale and total loss terms for one step.
struct LossReport {
  std::vector<double> g_gan, g_fm, d_real, d_fake;  // one entry per active scale
  double g_perc = 0.0;
  double g_gan_total = 0.0, g_fm_total = 0.0, d_real_total = 0.0, d_fake_total = 0.0;
  double g_total = 0.0, d_total = 0.0;
};

/// Fills the totals from the per-scale entries and the weights.
void finalize_report(LossReport& r, const LossWeights& w);

// All losses below optionally write d(loss)/d(input) scaled by `scale` into
// the provided gradient tensors (allocated on demand).

/// mean((real - 1)^2)/2 + mean(fake^2)/2
template <typename T>
double lsgan_d_loss(const Tensor<T>& score_real, const Tensor<T>& score_fake, Tensor<T>* grad_real = nullptr,
                    Tensor<T>* grad_fake = nullptr, double scale = 1.0, double real_target = 1.0,
                    double fake_target = 0.0);

/// mean((fake - 1)^2)/2
template <typename T>
double lsgan_g_loss(const Tensor<T>& score_fake, Tensor<T>* grad = nullptr, double scale = 1.0,
                    double real_target = 1.0);

/// Scale-summed variants.
template <typename T>
double lsgan_d_loss(const std::vector<Tensor<T>>& real, const std::vector<Tensor<T>>& fake);
template <typename T>
double lsgan_g_loss(const std::vector<Tensor<T>>& fake);

/// sum_i (1/N_i) * ||real_i - fake_i||_1, N_i the element count of tap i.
/// Gradients flow into `fake` only; `real` is treated as a constant.
template <typename T>
double layer_l1_loss(const std::vector<Tensor<T>>& real, const std::vector<Tensor<T>>& fake,
                     std::vector<Tensor<T>>* grad_fake = nullptr, double scale = 1.0);

/// Discriminator feature matching over all scales: sum over k of layer_l1_loss.
template <typename T>
double feature_matching_loss(const std::vector<std::vector<Tensor<T>>>& real,
                             const std::vector<std::vector<Tensor<T>>>& fake);


/// Layer-wise L1 between the first `taps` block outputs of a frozen feature
/// network on `x` and on `g_s`. When `grad_gs` is given the gradient w.r.t.
/// `g_s` (scaled by `scale`) is added to it; the network's parameters receive
/// no gradient.
template <typename T>
double perceptual_loss(const Tensor<T>& x, const Tensor<T>& g_s, nn::Network<T>& feature_net, int taps,
                       Tensor<T>* grad_gs = nullptr, double scale = 1.0);

}  // namespace labelsynth
