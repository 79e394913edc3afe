#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "labelsynth/arch.hpp"
#include "labelsynth/tensor.hpp"

namespace labelsynth::nn {

/// A named trainable array plus its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;

  Parameter(std::string n, std::vector<int> s);
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Per-call saved state of a forward pass; layers never cache on themselves,
/// so forward passes over shared parameters may run concurrently.
template <typename T>
struct LayerCache {
  std::vector<Tensor<T>> tensors;
  std::vector<T> scalars;
  std::vector<LayerCache> children;
};

struct BackwardMode {
  bool param_grads = true;  // accumulate into Parameter::grad
  bool input_grad = true;   // produce d(loss)/d(input)
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  /// `cache` may be null for inference-only passes.
  virtual Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const = 0;
  /// Returns the input gradient (empty when mode.input_grad is false).
  virtual Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) = 0;
  virtual void collect(const std::string& prefix, std::vector<Parameter<T>*>& out) { (void)prefix, (void)out; }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in, int out, int kernel, int stride, int padding, PaddingMode mode);
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>*>& out) override;

  int out_size(int in_size) const { return (in_size + 2 * padding_ - kernel_) / stride_ + 1; }
  Parameter<T>& weight() { return weight_; }  // HWIO layout
  Parameter<T>& bias() { return bias_; }

 private:
  int in_, out_, kernel_, stride_, padding_;
  PaddingMode mode_;
  Parameter<T> weight_, bias_;
};

/// Fractional-strided (transposed) 3x3 conv producing exactly 2x the input dims.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in, int out, int kernel = 3);
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>*>& out) override;

 private:
  int in_, out_, kernel_, padding_;
  Parameter<T> weight_, bias_;  // weight layout: (in, k, k, out)
};

/// Per-sample, per-plane normalization over the spatial dims (no affine terms).
template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  explicit InstanceNorm(T eps = T(1e-5)) : eps_(eps) {}
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;

 private:
  T eps_;
};

template <typename T>
class Activate final : public Layer<T> {
 public:
  explicit Activate(Activation kind) : kind_(kind) {}
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;

 private:
  Activation kind_;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;
  void add(std::string name, std::unique_ptr<Layer<T>> layer);
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>*>& out) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = x + body(x)
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(std::unique_ptr<Sequential<T>> body) : body_(std::move(body)) {}
  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>*>& out) override;

 private:
  std::unique_ptr<Sequential<T>> body_;
};

/// Builds the primitive stack for one LayerSpec.
template <typename T>
std::unique_ptr<Layer<T>> build_block(const LayerSpec& spec, int input_planes);

/// A sequential network realized from a LayerGraph (or a contiguous slice of
/// one). Every block's output can be tapped, and gradients can be injected at
/// any tap during backward.
template <typename T>
class Network {
 public:
  struct Trace {
    std::vector<LayerCache<T>> caches;
    std::vector<Tensor<T>> outputs;  // per-block outputs (taps)
  };

  Network() = default;
  /// Realizes blocks [first, last) of `graph`; `input_planes` feeds block `first`.
  Network(const LayerGraph& graph, int input_planes, std::string name, std::size_t first = 0,
          std::size_t last = static_cast<std::size_t>(-1));

  /// `trace` receives caches (needed for backward) and block outputs.
  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const;
  /// Backpropagates `dy` at the final output plus optional per-block tap
  /// gradients (empty entries are skipped). Parameter gradients are skipped
  /// while frozen.
  Tensor<T> backward(const Trace& trace, const Tensor<T>& dy, std::span<const Tensor<T>> tap_grads = {},
                     BackwardMode mode = {});

  std::vector<Parameter<T>*> parameters();
  std::size_t block_count() const { return blocks_.size(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const std::string& name() const { return name_; }
  int input_planes() const { return input_planes_; }
  int output_planes() const { return specs_.empty() ? input_planes_ : specs_.back().filters; }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

 private:
  std::string name_;
  int input_planes_ = 0;
  std::vector<LayerSpec> specs_;
  std::vector<std::string> block_names_;
  std::vector<std::unique_ptr<Layer<T>>> blocks_;
  bool frozen_ = false;
};

/// N(0, std^2) conv weights, zero biases.
template <typename T>
void init_normal(std::span<Parameter<T>* const> params, std::mt19937_64& rng, double stddev = 0.02);

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params);

/// Copies values between parameter lists with matching names and shapes.
template <typename Dst, typename Src>
void copy_values(std::span<Parameter<Dst>* const> dst, std::span<Parameter<Src>* const> src);

/// Adam with bias correction.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8);
  /// Updates every parameter from its current gradient.
  void step(double lr);
  std::int64_t steps() const { return t_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }
  /// First and second moment estimates, parallel to params().
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  /// Restores saved state; sizes must match params().
  void restore(std::int64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace labelsynth::nn
