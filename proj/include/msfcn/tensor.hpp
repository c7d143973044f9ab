#ifndef MSFCN_TENSOR_HPP
#define MSFCN_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "msfcn/errors.hpp"
#include "msfcn/rng.hpp"

namespace msfcn {

// Dense NCHW shape. Row-major layout: index = ((n*C + c)*H + h)*W + w.
struct Shape4 {
  int64_t n = 0, c = 0, h = 0, w = 0;

  Shape4() = default;
  Shape4(int64_t n_, int64_t c_, int64_t h_, int64_t w_)
      : n(n_), c(c_), h(h_), w(w_) {}

  int64_t elems() const { return n * c * h * w; }

  bool operator==(const Shape4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape4& o) const { return !(*this == o); }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }

  void validate() const {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw ShapeError("Shape4: all dims must be >= 1, got " + str());
    // Guard n*c*h*w against 64-bit overflow step by step.
    const int64_t lim = std::numeric_limits<int64_t>::max();
    int64_t e = n;
    for (int64_t d : {c, h, w}) {
      if (e > lim / d) throw ShapeError("Shape4: element count overflow");
      e *= d;
    }
  }
};

template <typename T>
struct TensorT {
  Shape4 shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(Shape4 s) : shape(s) {
    shape.validate();
    data.assign(static_cast<size_t>(shape.elems()), T(0));
  }
  TensorT(Shape4 s, std::vector<T> d) : shape(s), data(std::move(d)) {
    shape.validate();
    if (static_cast<int64_t>(data.size()) != shape.elems())
      throw ShapeError("Tensor: data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
  }

  int64_t elems() const { return shape.elems(); }

  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data[static_cast<size_t>(
        ((n * shape.c + c) * shape.h + h) * shape.w + w)];
  }
  T at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data[static_cast<size_t>(
        ((n * shape.c + c) * shape.h + h) * shape.w + w)];
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Integer label grid, one class id per pixel.
struct LabelMask {
  int64_t n = 0, h = 0, w = 0;
  std::vector<int32_t> data;

  LabelMask() = default;
  LabelMask(int64_t n_, int64_t h_, int64_t w_) : n(n_), h(h_), w(w_) {
    if (n < 1 || h < 1 || w < 1)
      throw ShapeError("LabelMask: all dims must be >= 1");
    data.assign(static_cast<size_t>(n * h * w), 0);
  }

  int64_t elems() const { return n * h * w; }
  int32_t& at(int64_t n_, int64_t y, int64_t x) {
    return data[static_cast<size_t>((n_ * h + y) * w + x)];
  }
  int32_t at(int64_t n_, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((n_ * h + y) * w + x)];
  }
};

template <typename T>
TensorT<T> zeros(Shape4 shape) {
  return TensorT<T>(shape);
}

inline Tensor zeros(Shape4 shape) { return Tensor(shape); }

// Deterministic Gaussian fill: a fixed seed gives a bit-identical tensor.
// Samples are drawn in flat scan order from one splitmix64 stream.
template <typename T>
TensorT<T> randn_t(Shape4 shape, uint64_t seed, double stddev) {
  if (!(stddev > 0.0)) throw ValueError("randn: stddev must be > 0");
  TensorT<T> t(shape);
  Rng rng(seed);
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

inline Tensor randn(Shape4 shape, uint64_t seed, double stddev) {
  return randn_t<float>(shape, seed, stddev);
}

// Channel concatenation in argument order; parts must agree on n/h/w.
template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape4& s0 = parts[0].shape;
  int64_t c_total = 0;
  for (const auto& p : parts) {
    if (p.shape.n != s0.n || p.shape.h != s0.h || p.shape.w != s0.w)
      throw ShapeError("concat_channels: n/h/w mismatch, " + p.shape.str() +
                       " vs " + s0.str());
    c_total += p.shape.c;
  }
  TensorT<T> out(Shape4(s0.n, c_total, s0.h, s0.w));
  const int64_t plane = s0.h * s0.w;
  for (int64_t n = 0; n < s0.n; ++n) {
    int64_t c_off = 0;
    for (const auto& p : parts) {
      const int64_t block = p.shape.c * plane;
      const T* src = p.data.data() + n * block;
      T* dst = out.data.data() + (n * c_total + c_off) * plane;
      std::copy(src, src + block, dst);
      c_off += p.shape.c;
    }
  }
  return out;
}

// Half-open channel interval [lo, hi).
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& t, int64_t lo, int64_t hi) {
  if (lo < 0 || lo >= hi || hi > t.shape.c)
    throw ShapeError("slice_channels: bad interval [" + std::to_string(lo) +
                     "," + std::to_string(hi) + ") for c=" +
                     std::to_string(t.shape.c));
  TensorT<T> out(Shape4(t.shape.n, hi - lo, t.shape.h, t.shape.w));
  const int64_t plane = t.shape.h * t.shape.w;
  for (int64_t n = 0; n < t.shape.n; ++n) {
    const T* src = t.data.data() + (n * t.shape.c + lo) * plane;
    T* dst = out.data.data() + n * (hi - lo) * plane;
    std::copy(src, src + (hi - lo) * plane, dst);
  }
  return out;
}

// Stacks single-sample tensors along the batch axis.
template <typename T>
TensorT<T> stack_batch(const std::vector<TensorT<T>>& items) {
  if (items.empty()) throw ShapeError("stack_batch: no items");
  const Shape4& s0 = items[0].shape;
  int64_t n_total = 0;
  for (const auto& it : items) {
    if (it.shape.c != s0.c || it.shape.h != s0.h || it.shape.w != s0.w)
      throw ShapeError("stack_batch: c/h/w mismatch");
    n_total += it.shape.n;
  }
  TensorT<T> out(Shape4(n_total, s0.c, s0.h, s0.w));
  T* dst = out.data.data();
  for (const auto& it : items) {
    std::copy(it.data.begin(), it.data.end(), dst);
    dst += it.data.size();
  }
  return out;
}

inline LabelMask stack_batch_masks(const std::vector<LabelMask>& items) {
  if (items.empty()) throw ShapeError("stack_batch_masks: no items");
  int64_t n_total = 0;
  for (const auto& it : items) {
    if (it.h != items[0].h || it.w != items[0].w)
      throw ShapeError("stack_batch_masks: h/w mismatch");
    n_total += it.n;
  }
  LabelMask out(n_total, items[0].h, items[0].w);
  auto dst = out.data.begin();
  for (const auto& it : items)
    dst = std::copy(it.data.begin(), it.data.end(), dst);
  return out;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
TensorT<T> cast_tensor(const Tensor& t) {
  TensorT<T> out(t.shape);
  for (size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<T>(t.data[i]);
  return out;
}

}  // namespace msfcn

#endif
