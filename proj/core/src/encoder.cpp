#include "labelsynth/encoder.hpp"

#include "labelsynth/error.hpp"

namespace labelsynth {

template <typename T>
RegionVectors<T> region_sums(const T* planes, int stride, int offset, const RegionIndex& regions) {
  RegionVectors<T> sums(regions.keys.size(), std::array<T, 3>{T(0), T(0), T(0)});
  for (std::size_t p = 0; p < regions.region_of_pixel.size(); ++p) {
    auto& s = sums[static_cast<std::size_t>(regions.region_of_pixel[p])];
    const T* v = planes + p * stride + offset;
    s[0] += v[0];
    s[1] += v[1];
    s[2] += v[2];
  }
  return sums;
}

template <typename T>
RegionVectors<T> region_means(const T* planes, const RegionIndex& regions) {
  RegionVectors<T> m = region_sums(planes, 3, 0, regions);
  for (std::size_t r = 0; r < m.size(); ++r)
    for (auto& v : m[r]) v /= static_cast<T>(regions.pixel_counts[r]);
  return m;
}

template <typename T>
Tensor<T> instance_average_pool(const Tensor<T>& raw, const std::vector<RegionIndex>& regions) {
  if (raw.c() != 3 || static_cast<std::size_t>(raw.n()) != regions.size())
    throw ShapeError("instance pooling needs (n,h,w,3) with one region index per sample, got " + raw.shape_string());
  Tensor<T> out(raw.n(), raw.h(), raw.w(), 3);
  for (int n = 0; n < raw.n(); ++n) {
    const RegionIndex& r = regions[static_cast<std::size_t>(n)];
    if (r.height != raw.h() || r.width != raw.w()) throw ShapeError("instance pooling: region index dims differ");
    const RegionVectors<T> m = region_means(raw.sample(n), r);
    T* dst = out.sample(n);
    for (std::size_t p = 0; p < r.region_of_pixel.size(); ++p) {
      const auto& v = m[static_cast<std::size_t>(r.region_of_pixel[p])];
      std::copy(v.begin(), v.end(), dst + p * 3);
    }
  }
  return out;
}

template <typename T>
Encoder<T>::Encoder(const std::string& arch) : graph_(parse_arch(arch)) {
  if (graph_.output_planes() != 3) throw ShapeError("encoder must output 3 planes");
  net_ = nn::Network<T>(graph_, 3, "enc");
}

template <typename T>
Tensor<T> Encoder<T>::raw(const Tensor<T>& image, Trace* trace) const {
  return net_.forward(image, trace);
}

template <typename T>
std::vector<RegionVectors<T>> Encoder<T>::encode_regions(const Tensor<T>& image,
                                                         const std::vector<RegionIndex>& regions,
                                                         Trace* trace) const {
  const Tensor<T> r = raw(image, trace);
  if (static_cast<std::size_t>(r.n()) != regions.size()) throw ShapeError("encoder: one region index per sample");
  std::vector<RegionVectors<T>> out;
  for (int n = 0; n < r.n(); ++n) {
    const RegionIndex& idx = regions[static_cast<std::size_t>(n)];
    if (idx.height != r.h() || idx.width != r.w()) throw ShapeError("encoder: region index dims differ from image");
    out.push_back(region_means(r.sample(n), idx));
  }
  return out;
}

template <typename T>
Tensor<T> Encoder<T>::encode_pooled(const Tensor<T>& image, const std::vector<RegionIndex>& regions) const {
  return instance_average_pool(raw(image), regions);
}

template <typename T>
void Encoder<T>::backward(const Trace& trace, const std::vector<RegionVectors<T>>& d_means,
                          const std::vector<RegionIndex>& regions) {
  const Tensor<T>& out = trace.outputs.back();
  Tensor<T> d_raw(out.n(), out.h(), out.w(), 3);
  for (int n = 0; n < out.n(); ++n) {
    const RegionIndex& r = regions[static_cast<std::size_t>(n)];
    const RegionVectors<T>& dm = d_means[static_cast<std::size_t>(n)];
    T* dst = d_raw.sample(n);
    for (std::size_t p = 0; p < r.region_of_pixel.size(); ++p) {
      const std::size_t id = static_cast<std::size_t>(r.region_of_pixel[p]);
      const T inv = T(1) / static_cast<T>(r.pixel_counts[id]);
      for (int c = 0; c < 3; ++c) dst[p * 3 + c] = dm[id][static_cast<std::size_t>(c)] * inv;
    }
  }
  net_.backward(trace, d_raw, {}, {.param_grads = true, .input_grad = false});
}

#define LABELSYNTH_INSTANTIATE(T)                                                             \
  template RegionVectors<T> region_sums<T>(const T*, int, int, const RegionIndex&);           \
  template RegionVectors<T> region_means<T>(const T*, const RegionIndex&);                    \
  template Tensor<T> instance_average_pool<T>(const Tensor<T>&, const std::vector<RegionIndex>&); \
  template class Encoder<T>;

LABELSYNTH_INSTANTIATE(float)
LABELSYNTH_INSTANTIATE(double)
#undef LABELSYNTH_INSTANTIATE

}  // namespace labelsynth
