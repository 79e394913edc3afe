#include "labelsynth/nn.hpp"

#include <Eigen/Core>
#include <cmath>

#include "labelsynth/error.hpp"

namespace labelsynth::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;
template <typename T>
using CMapV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

/// Input coordinate for every (output position, kernel tap); -1 means zero padding.
std::vector<int> tap_index(int out_size, int in_size, int kernel, int stride, int padding, PaddingMode mode) {
  std::vector<int> idx(static_cast<std::size_t>(out_size) * kernel);
  for (int o = 0; o < out_size; ++o)
    for (int k = 0; k < kernel; ++k) {
      int i = o * stride - padding + k;
      if (i < 0 || i >= in_size) {
        if (mode == PaddingMode::reflect) {
          // Fold repeatedly so padding wider than the input stays defined.
          const int period = 2 * (in_size - 1);
          if (period == 0) {
            i = 0;
          } else {
            i = ((i % period) + period) % period;
            if (i >= in_size) i = period - i;
          }
        } else {
          i = -1;
        }
      }
      idx[static_cast<std::size_t>(o) * kernel + k] = i;
    }
  return idx;
}

struct Geometry {
  int h, w, c, out_h, out_w, kernel;
  std::vector<int> ymap, xmap;
};

// col is (K x P) column-major with K = kernel*kernel*c, P = out_h*out_w.
template <typename T>
void im2col(const T* x, const Geometry& g, T* col) {
  const int k = g.kernel;
  const std::size_t K = static_cast<std::size_t>(k) * k * g.c;
  for (int oy = 0; oy < g.out_h; ++oy)
    for (int ox = 0; ox < g.out_w; ++ox) {
      T* dst = col + (static_cast<std::size_t>(oy) * g.out_w + ox) * K;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = g.ymap[static_cast<std::size_t>(oy) * k + ky];
        for (int kx = 0; kx < k; ++kx, dst += g.c) {
          const int ix = g.xmap[static_cast<std::size_t>(ox) * k + kx];
          if (iy < 0 || ix < 0) {
            std::fill_n(dst, g.c, T(0));
          } else {
            std::copy_n(x + (static_cast<std::size_t>(iy) * g.w + ix) * g.c, g.c, dst);
          }
        }
      }
    }
}

template <typename T>
void col2im(const T* col, const Geometry& g, T* dx) {
  const int k = g.kernel;
  const std::size_t K = static_cast<std::size_t>(k) * k * g.c;
  for (int oy = 0; oy < g.out_h; ++oy)
    for (int ox = 0; ox < g.out_w; ++ox) {
      const T* src = col + (static_cast<std::size_t>(oy) * g.out_w + ox) * K;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = g.ymap[static_cast<std::size_t>(oy) * k + ky];
        for (int kx = 0; kx < k; ++kx, src += g.c) {
          const int ix = g.xmap[static_cast<std::size_t>(ox) * k + kx];
          if (iy < 0 || ix < 0) continue;
          T* d = dx + (static_cast<std::size_t>(iy) * g.w + ix) * g.c;
          for (int c = 0; c < g.c; ++c) d[c] += src[c];
        }
      }
    }
}

template <typename T>
void accumulate(std::vector<T>& dst, const T* src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Parameter<T>::Parameter(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t total = 1;
  for (int d : shape) total *= static_cast<std::size_t>(d);
  value.assign(total, T(0));
  grad.assign(total, T(0));
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in, int out, int kernel, int stride, int padding, PaddingMode mode)
    : in_(in),
      out_(out),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      mode_(mode),
      weight_("weight", {kernel, kernel, in, out}),
      bias_("bias", {out}) {}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  if (x.c() != in_) throw ShapeError("conv expects " + std::to_string(in_) + " planes, got " + x.shape_string());
  const int oh = out_size(x.h()), ow = out_size(x.w());
  if (oh < 1 || ow < 1) throw ShapeError("conv output collapses for input " + x.shape_string());
  Geometry g{x.h(), x.w(), in_, oh, ow, kernel_,
             tap_index(oh, x.h(), kernel_, stride_, padding_, mode_),
             tap_index(ow, x.w(), kernel_, stride_, padding_, mode_)};
  const Eigen::Index K = static_cast<Eigen::Index>(kernel_) * kernel_ * in_;
  const Eigen::Index P = static_cast<Eigen::Index>(oh) * ow;
  Tensor<T> y(x.n(), oh, ow, out_);
  AlignedVector<T> col(static_cast<std::size_t>(K * P));
  CMapM<T> W(weight_.value.data(), out_, K);
  CMapV<T> b(bias_.value.data(), out_);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), g, col.data());
    MapM<T> Y(y.sample(n), out_, P);
    Y.noalias() = W * CMapM<T>(col.data(), K, P);
    Y.colwise() += b;
  }
  if (cache) cache->tensors = {x};
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  const Tensor<T>& x = cache.tensors.at(0);
  const int oh = dy.h(), ow = dy.w();
  Geometry g{x.h(), x.w(), in_, oh, ow, kernel_,
             tap_index(oh, x.h(), kernel_, stride_, padding_, mode_),
             tap_index(ow, x.w(), kernel_, stride_, padding_, mode_)};
  const Eigen::Index K = static_cast<Eigen::Index>(kernel_) * kernel_ * in_;
  const Eigen::Index P = static_cast<Eigen::Index>(oh) * ow;
  AlignedVector<T> col(static_cast<std::size_t>(K * P));
  CMapM<T> W(weight_.value.data(), out_, K);
  MapM<T> dW(weight_.grad.data(), out_, K);
  MapV<T> db(bias_.grad.data(), out_);
  Tensor<T> dx;
  if (mode.input_grad) dx = Tensor<T>(x.n(), x.h(), x.w(), x.c());
  for (int n = 0; n < x.n(); ++n) {
    CMapM<T> dY(dy.sample(n), out_, P);
    if (mode.param_grads) {
      im2col(x.sample(n), g, col.data());
      dW.noalias() += dY * CMapM<T>(col.data(), K, P).transpose();
      db += dY.rowwise().sum();
    }
    if (mode.input_grad) {
      MapM<T>(col.data(), K, P).noalias() = W.transpose() * dY;
      col2im(col.data(), g, dx.sample(n));
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<Parameter<T>*>& out) {
  weight_.name = prefix + "weight";
  bias_.name = prefix + "bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ------------------------------------------------------- ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int in, int out, int kernel)
    : in_(in),
      out_(out),
      kernel_(kernel),
      padding_((kernel - 1) / 2),
      weight_("weight", {in, kernel, kernel, out}),
      bias_("bias", {out}) {}

// Output pixel (oy, ox) receives input (iy, ix) through tap (ky, kx) when
// oy = 2*iy - padding + ky. Expressed as a Geometry over the *output* grid
// with stride 2, the same gather/scatter helpers apply with roles swapped.
template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  if (x.c() != in_)
    throw ShapeError("transposed conv expects " + std::to_string(in_) + " planes, got " + x.shape_string());
  const int oh = 2 * x.h(), ow = 2 * x.w();
  Geometry g{oh, ow, out_, x.h(), x.w(), kernel_, tap_index(x.h(), oh, kernel_, 2, padding_, PaddingMode::zero),
             tap_index(x.w(), ow, kernel_, 2, padding_, PaddingMode::zero)};
  const Eigen::Index Kout = static_cast<Eigen::Index>(kernel_) * kernel_ * out_;
  const Eigen::Index P = static_cast<Eigen::Index>(x.h()) * x.w();
  Tensor<T> y(x.n(), oh, ow, out_);
  AlignedVector<T> col(static_cast<std::size_t>(Kout * P));
  CMapM<T> Wt(weight_.value.data(), Kout, in_);
  for (int n = 0; n < x.n(); ++n) {
    MapM<T>(col.data(), Kout, P).noalias() = Wt * CMapM<T>(x.sample(n), in_, P);
    col2im(col.data(), g, y.sample(n));
    MapM<T>(y.sample(n), out_, static_cast<Eigen::Index>(oh) * ow).colwise() += CMapV<T>(bias_.value.data(), out_);
  }
  if (cache) cache->tensors = {x};
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  const Tensor<T>& x = cache.tensors.at(0);
  const int oh = dy.h(), ow = dy.w();
  Geometry g{oh, ow, out_, x.h(), x.w(), kernel_, tap_index(x.h(), oh, kernel_, 2, padding_, PaddingMode::zero),
             tap_index(x.w(), ow, kernel_, 2, padding_, PaddingMode::zero)};
  const Eigen::Index Kout = static_cast<Eigen::Index>(kernel_) * kernel_ * out_;
  const Eigen::Index P = static_cast<Eigen::Index>(x.h()) * x.w();
  AlignedVector<T> col(static_cast<std::size_t>(Kout * P));
  CMapM<T> Wt(weight_.value.data(), Kout, in_);
  MapM<T> dWt(weight_.grad.data(), Kout, in_);
  MapV<T> db(bias_.grad.data(), out_);
  Tensor<T> dx;
  if (mode.input_grad) dx = Tensor<T>(x.n(), x.h(), x.w(), x.c());
  for (int n = 0; n < x.n(); ++n) {
    im2col(dy.sample(n), g, col.data());
    CMapM<T> dcol(col.data(), Kout, P);
    if (mode.param_grads) {
      dWt.noalias() += dcol * CMapM<T>(x.sample(n), in_, P).transpose();
      db += CMapM<T>(dy.sample(n), out_, static_cast<Eigen::Index>(oh) * ow).rowwise().sum();
    }
    if (mode.input_grad) MapM<T>(dx.sample(n), in_, P).noalias() = Wt.transpose() * dcol;
  }
  return dx;
}

template <typename T>
void ConvTranspose2d<T>::collect(const std::string& prefix, std::vector<Parameter<T>*>& out) {
  weight_.name = prefix + "weight";
  bias_.name = prefix + "bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------- InstanceNorm

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  const Eigen::Index C = x.c(), P = static_cast<Eigen::Index>(x.h()) * x.w();
  Tensor<T> y(x.n(), x.h(), x.w(), x.c());
  std::vector<T> inv_std(static_cast<std::size_t>(x.n()) * C);
  for (int n = 0; n < x.n(); ++n) {
    CMapM<T> X(x.sample(n), C, P);
    MapM<T> Y(y.sample(n), C, P);
    const Eigen::Matrix<T, Eigen::Dynamic, 1> mean = X.rowwise().mean();
    Y = X.colwise() - mean;
    const Eigen::Matrix<T, Eigen::Dynamic, 1> var = Y.array().square().rowwise().mean();
    for (Eigen::Index c = 0; c < C; ++c) {
      const T s = T(1) / std::sqrt(var(c) + eps_);
      inv_std[static_cast<std::size_t>(n) * C + c] = s;
      Y.row(c) *= s;
    }
  }
  if (cache) {
    cache->tensors = {y};
    cache->scalars = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  if (!mode.input_grad) return {};
  const Tensor<T>& y = cache.tensors.at(0);
  const Eigen::Index C = y.c(), P = static_cast<Eigen::Index>(y.h()) * y.w();
  Tensor<T> dx(y.n(), y.h(), y.w(), y.c());
  for (int n = 0; n < y.n(); ++n) {
    CMapM<T> Y(y.sample(n), C, P);
    CMapM<T> dY(dy.sample(n), C, P);
    MapM<T> dX(dx.sample(n), C, P);
    const Eigen::Matrix<T, Eigen::Dynamic, 1> mean_dy = dY.rowwise().mean();
    const Eigen::Matrix<T, Eigen::Dynamic, 1> mean_dyy = dY.cwiseProduct(Y).rowwise().mean();
    for (Eigen::Index c = 0; c < C; ++c) {
      const T s = cache.scalars[static_cast<std::size_t>(n) * C + c];
      dX.row(c) = s * (dY.row(c).array() - mean_dy(c) - Y.row(c).array() * mean_dyy(c)).matrix();
    }
  }
  return dx;
}

// -------------------------------------------------------------- Activate

template <typename T>
Tensor<T> Activate<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  Tensor<T> y = x;
  switch (kind_) {
    case Activation::relu:
      for (auto& v : y.span()) v = v < T(0) ? T(0) : v;  // NaN propagates
      break;
    case Activation::leaky_relu:
      for (auto& v : y.span()) v = v < T(0) ? T(kLeakySlope) * v : v;
      break;
    case Activation::tanh:
      for (auto& v : y.span()) v = std::tanh(v);
      break;
    case Activation::none:
      break;
  }
  if (cache) cache->tensors = {y};
  return y;
}

template <typename T>
Tensor<T> Activate<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  if (!mode.input_grad) return {};
  const Tensor<T>& y = cache.tensors.at(0);
  Tensor<T> dx = dy;
  switch (kind_) {
    case Activation::relu:
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > T(0))) dx[i] = T(0);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > T(0))) dx[i] *= T(kLeakySlope);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= T(1) - y[i] * y[i];
      break;
    case Activation::none:
      break;
  }
  return dx;
}

// ------------------------------------------------------------ Sequential

template <typename T>
void Sequential<T>::add(std::string name, std::unique_ptr<Layer<T>> layer) {
  names_.push_back(std::move(name));
  layers_.push_back(std::move(layer));
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  if (cache) cache->children.assign(layers_.size(), {});
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, cache ? &cache->children[i] : nullptr);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  Tensor<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    BackwardMode m = mode;
    if (i > 0) m.input_grad = true;
    g = layers_[i]->backward(g, cache.children.at(i), m);
  }
  return g;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, std::vector<Parameter<T>*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(prefix + names_[i] + "/", out);
}

// -------------------------------------------------------------- Residual

template <typename T>
Tensor<T> Residual<T>::forward(const Tensor<T>& x, LayerCache<T>* cache) const {
  if (cache) cache->children.assign(1, {});
  Tensor<T> y = body_->forward(x, cache ? &cache->children[0] : nullptr);
  y += x;
  return y;
}

template <typename T>
Tensor<T> Residual<T>::backward(const Tensor<T>& dy, const LayerCache<T>& cache, BackwardMode mode) {
  Tensor<T> dx = body_->backward(dy, cache.children.at(0), mode);
  if (!mode.input_grad) return {};
  dx += dy;
  return dx;
}

template <typename T>
void Residual<T>::collect(const std::string& prefix, std::vector<Parameter<T>*>& out) {
  body_->collect(prefix, out);
}

// --------------------------------------------------------------- builder

template <typename T>
std::unique_ptr<Layer<T>> build_block(const LayerSpec& s, int in) {
  auto seq = std::make_unique<Sequential<T>>();
  switch (s.kind) {
    case LayerKind::residual_block: {
      auto body = std::make_unique<Sequential<T>>();
      body->add("conv1", std::make_unique<Conv2d<T>>(in, s.filters, s.kernel, 1, s.padding, s.padding_mode));
      body->add("norm1", std::make_unique<InstanceNorm<T>>());
      body->add("relu1", std::make_unique<Activate<T>>(Activation::relu));
      body->add("conv2", std::make_unique<Conv2d<T>>(s.filters, s.filters, s.kernel, 1, s.padding, s.padding_mode));
      body->add("norm2", std::make_unique<InstanceNorm<T>>());
      return std::make_unique<Residual<T>>(std::move(body));
    }
    case LayerKind::up_conv:
      seq->add("conv", std::make_unique<ConvTranspose2d<T>>(in, s.filters, s.kernel));
      break;
    default:
      seq->add("conv", std::make_unique<Conv2d<T>>(in, s.filters, s.kernel, s.stride.num, s.padding, s.padding_mode));
  }
  if (s.norm == Norm::instance) seq->add("norm", std::make_unique<InstanceNorm<T>>());
  if (s.activation != Activation::none) seq->add("act", std::make_unique<Activate<T>>(s.activation));
  return seq;
}

// --------------------------------------------------------------- Network

template <typename T>
Network<T>::Network(const LayerGraph& graph, int input_planes, std::string name, std::size_t first,
                    std::size_t last)
    : name_(std::move(name)), input_planes_(input_planes) {
  last = std::min(last, graph.layers.size());
  int planes = input_planes;
  for (std::size_t i = first; i < last; ++i) {
    const LayerSpec& s = graph.layers[i];
    if (s.kind == LayerKind::residual_block && planes != s.filters)
      throw ShapeError(name_ + ": residual block " + std::to_string(i) + " on " + std::to_string(planes) + " planes");
    specs_.push_back(s);
    char idx[8];
    std::snprintf(idx, sizeof idx, "%02zu", i);
    block_names_.push_back(std::string(idx) + "_" + layer_token(s));
    blocks_.push_back(build_block<T>(s, planes));
    planes = s.filters;
  }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Trace* trace) const {
  if (x.c() != input_planes_)
    throw ShapeError(name_ + " expects " + std::to_string(input_planes_) + " input planes, got " + x.shape_string());
  if (trace) {
    trace->caches.assign(blocks_.size(), {});
    trace->outputs.clear();
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i]->forward(h, trace ? &trace->caches[i] : nullptr);
    if (trace) trace->outputs.push_back(h);
  }
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Trace& trace, const Tensor<T>& dy, std::span<const Tensor<T>> tap_grads,
                               BackwardMode mode) {
  if (trace.caches.size() != blocks_.size()) throw Error(name_ + ": backward without a matching trace");
  if (frozen_) mode.param_grads = false;
  Tensor<T> g = dy;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    if (i < tap_grads.size() && !tap_grads[i].empty()) {
      if (g.empty()) {
        g = tap_grads[i];
      } else {
        g += tap_grads[i];
      }
    }
    if (g.empty()) continue;
    BackwardMode m = mode;
    if (i > 0) m.input_grad = true;
    g = blocks_[i]->backward(g, trace.caches[i], m);
  }
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i]->collect(name_ + "/" + block_names_[i] + "/", out);
  return out;
}

// ------------------------------------------------------------- utilities

template <typename T>
void init_normal(std::span<Parameter<T>* const> params, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Parameter<T>* p : params) {
    const bool is_bias = p->shape.size() == 1;
    for (auto& v : p->value) v = is_bias ? T(0) : static_cast<T>(dist(rng));
  }
}

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params) {
  for (Parameter<T>* p : params) p->zero_grad();
}

template <typename Dst, typename Src>
void copy_values(std::span<Parameter<Dst>* const> dst, std::span<Parameter<Src>* const> src) {
  if (dst.size() != src.size()) throw ShapeError("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->name != src[i]->name || dst[i]->shape != src[i]->shape)
      throw ShapeError("copy_values: " + dst[i]->name + " vs " + src[i]->name);
    for (std::size_t j = 0; j < dst[i]->value.size(); ++j) dst[i]->value[j] = static_cast<Dst>(src[i]->value[j]);
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->size(), T(0));
    v_.emplace_back(p->size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const T step = static_cast<T>(lr * std::sqrt(c2) / c1);
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T eps = static_cast<T>(eps_ * std::sqrt(c2));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T g = p.grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      if (lr != 0.0) p.value[j] -= step * m[j] / (std::sqrt(v[j]) + eps);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::int64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) throw ShapeError("optimizer state size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (m[i].size() != params_[i]->size() || v[i].size() != params_[i]->size())
      throw ShapeError("optimizer state mismatch at " + params_[i]->name);
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

#define LABELSYNTH_INSTANTIATE(T)                                                            \
  template struct Parameter<T>;                                                              \
  template class Conv2d<T>;                                                                  \
  template class ConvTranspose2d<T>;                                                         \
  template class InstanceNorm<T>;                                                            \
  template class Activate<T>;                                                                \
  template class Sequential<T>;                                                              \
  template class Residual<T>;                                                                \
  template class Network<T>;                                                                 \
  template class Adam<T>;                                                                    \
  template std::unique_ptr<Layer<T>> build_block<T>(const LayerSpec&, int);                  \
  template void init_normal<T>(std::span<Parameter<T>* const>, std::mt19937_64&, double);   \
  template void zero_grads<T>(std::span<Parameter<T>* const>);

LABELSYNTH_INSTANTIATE(float)
LABELSYNTH_INSTANTIATE(double)
#undef LABELSYNTH_INSTANTIATE

template void copy_values<double, float>(std::span<Parameter<double>* const>, std::span<Parameter<float>* const>);
template void copy_values<float, double>(std::span<Parameter<float>* const>, std::span<Parameter<double>* const>);
template void copy_values<float, float>(std::span<Parameter<float>* const>, std::span<Parameter<float>* const>);

}  // namespace labelsynth::nn
