#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "labelsynth/error.hpp"

namespace labelsynth {

/// Cache-line aligned storage. Vectorized reductions peel up to the first
/// aligned element, so a fixed alignment keeps summation order (and results)
/// independent of where the heap happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlignment)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlignment)); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense 4-D array in channels-last order (batch, height, width, planes).
///
/// Channels-last keeps every pixel's planes contiguous, which is the layout
/// the convolution kernels feed straight into GEMM.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int h, int w, int c, T fill = T(0))
      : n_(n), h_(h), w_(w), c_(c), data_(static_cast<std::size_t>(n) * h * w * c, fill) {
    if (n < 0 || h < 0 || w < 0 || c < 0) throw ShapeError("negative tensor dimension");
  }

  int n() const noexcept { return n_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  int c() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  /// Elements of one sample (h * w * c).
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(h_) * w_ * c_; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  T* sample(int i) noexcept { return data_.data() + i * sample_size(); }
  const T* sample(int i) const noexcept { return data_.data() + i * sample_size(); }

  T& operator()(int n, int y, int x, int c) noexcept { return data_[index(n, y, x, c)]; }
  const T& operator()(int n, int y, int x, int c) const noexcept { return data_[index(n, y, x, c)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  bool same_shape(const Tensor& o) const noexcept {
    return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }
  std::string shape_string() const {
    return "[" + std::to_string(n_) + "," + std::to_string(h_) + "," + std::to_string(w_) + "," +
           std::to_string(c_) + "]";
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  /// Copies a single sample into a batch-1 tensor.
  Tensor slice(int i) const {
    Tensor out(1, h_, w_, c_);
    std::copy_n(sample(i), sample_size(), out.data());
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, h_, w_, c_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void require_same(const Tensor& o, const char* what) const {
    if (!same_shape(o))
      throw ShapeError(std::string(what) + ": shape " + shape_string() + " vs " + o.shape_string());
  }

 private:
  std::size_t index(int n, int y, int x, int c) const noexcept {
    return ((static_cast<std::size_t>(n) * h_ + y) * w_ + x) * c_ + c;
  }

  int n_ = 0, h_ = 0, w_ = 0, c_ = 0;
  AlignedVector<T> data_;
};

/// Concatenates along the plane axis; batch and spatial dims must agree.
template <typename T>
Tensor<T> concat_planes(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw ShapeError("concat_planes: " + a.shape_string() + " vs " + b.shape_string());
  Tensor<T> out(a.n(), a.h(), a.w(), a.c() + b.c());
  const std::size_t pixels = static_cast<std::size_t>(a.n()) * a.h() * a.w();
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(a.data() + p * a.c(), a.c(), out.data() + p * out.c());
    std::copy_n(b.data() + p * b.c(), b.c(), out.data() + p * out.c() + a.c());
  }
  return out;
}

/// Extracts planes [first, first + count).
template <typename T>
Tensor<T> take_planes(const Tensor<T>& a, int first, int count) {
  if (first < 0 || count < 0 || first + count > a.c()) throw ShapeError("take_planes out of range");
  Tensor<T> out(a.n(), a.h(), a.w(), count);
  const std::size_t pixels = static_cast<std::size_t>(a.n()) * a.h() * a.w();
  for (std::size_t p = 0; p < pixels; ++p)
    std::copy_n(a.data() + p * a.c() + first, count, out.data() + p * count);
  return out;
}

/// Stacks batch-1 (or any batch) tensors along the batch axis.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) return {};
  int n = 0;
  for (const auto& p : parts) {
    if (p.h() != parts[0].h() || p.w() != parts[0].w() || p.c() != parts[0].c())
      throw ShapeError("stack_batch: mismatched sample shapes");
    n += p.n();
  }
  Tensor<T> out(n, parts[0].h(), parts[0].w(), parts[0].c());
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy_n(p.data(), p.size(), dst);
  return out;
}

/// 2x2 mean pooling; spatial dims must be even.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) throw ShapeError("avg_pool2 needs even dims, got " + x.shape_string());
  Tensor<T> out(x.n(), x.h() / 2, x.w() / 2, x.c());
  for (int n = 0; n < x.n(); ++n)
    for (int y = 0; y < out.h(); ++y)
      for (int xx = 0; xx < out.w(); ++xx)
        for (int c = 0; c < x.c(); ++c)
          out(n, y, xx, c) = (x(n, 2 * y, 2 * xx, c) + x(n, 2 * y, 2 * xx + 1, c) + x(n, 2 * y + 1, 2 * xx, c) +
                              x(n, 2 * y + 1, 2 * xx + 1, c)) /
                             T(4);
  return out;
}

/// Adjoint of avg_pool2: spreads each gradient a quarter to its 2x2 block.
template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n(), dy.h() * 2, dy.w() * 2, dy.c());
  for (int n = 0; n < dy.n(); ++n)
    for (int y = 0; y < dx.h(); ++y)
      for (int x = 0; x < dx.w(); ++x)
        for (int c = 0; c < dy.c(); ++c) dx(n, y, x, c) = dy(n, y / 2, x / 2, c) / T(4);
  return dx;
}

}  // namespace labelsynth
