#pragma once
// Rank-4 tensor (batch, channel, height, width), contiguous row-major.
// float carries training, double carries gradient checks.

#include <cstdint>
#include <string>
#include <vector>

#include "hallucigrid/common.hpp"
#include "hallucigrid/grid.hpp"

namespace hg {

template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
      throw DataError("Tensor4: all shape components must be >= 1");
  }

  size_t size() const { return v.size(); }
  size_t plane_size() const { return static_cast<size_t>(h) * w; }

  T* plane(int ni, int ci) {
    return v.data() + (static_cast<size_t>(ni) * c + ci) * plane_size();
  }
  const T* plane(int ni, int ci) const {
    return v.data() + (static_cast<size_t>(ni) * c + ci) * plane_size();
  }

  T& at(int ni, int ci, int y, int x) { return plane(ni, ci)[static_cast<size_t>(y) * w + x]; }
  T at(int ni, int ci, int y, int x) const {
    return plane(ni, ci)[static_cast<size_t>(y) * w + x];
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

// Network input encoding: one real channel with road=1, non-road=0, unobserved=0.5.
template <typename T>
Tensor4<T> encode_ternary_batch(std::span<const TernaryGrid> grids) {
  if (grids.empty()) throw DataError("encode_ternary_batch: empty batch");
  Tensor4<T> t(static_cast<int>(grids.size()), 1, grids[0].height, grids[0].width);
  for (size_t i = 0; i < grids.size(); ++i) {
    detail::check_same_dims(grids[i].height, grids[i].width, t.h, t.w, "encode_ternary_batch");
    T* p = t.plane(static_cast<int>(i), 0);
    for (size_t j = 0; j < grids[i].size(); ++j)
      p[j] = static_cast<T>(status_value(grids[i].cells[j]));
  }
  return t;
}

template <typename T>
BinaryGrid binarize_plane(const Tensor4<T>& t, int ni, double threshold = 0.5) {
  return binarize(std::span<const T>(t.plane(ni, 0), t.plane_size()), t.h, t.w, threshold);
}

}  // namespace hg
