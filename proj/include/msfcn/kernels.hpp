#ifndef MSFCN_KERNELS_HPP
#define MSFCN_KERNELS_HPP

// Plain (graph-free) numerical kernels shared by the autodiff layer and
// by value-level helpers. Everything is templated on the scalar type so
// gradient checks can rerun the identical code in 64-bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "msfcn/tensor.hpp"

namespace msfcn {

// C(M x N) += A(M x K) * B(K x N), all row-major.
template <typename T>
void gemm_nn(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C) {
  for (int64_t i = 0; i < M; ++i) {
    T* c_row = C + i * N;
    const T* a_row = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
      const T a = a_row[k];
      if (a == T(0)) continue;
      const T* b_row = B + k * N;
      for (int64_t j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C(M x N) += A(M x K) * B^T where B is (N x K) row-major.
template <typename T>
void gemm_nt(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C) {
  for (int64_t i = 0; i < M; ++i) {
    const T* a_row = A + i * K;
    T* c_row = C + i * N;
    for (int64_t j = 0; j < N; ++j) {
      const T* b_row = B + j * K;
      T acc = T(0);
      for (int64_t k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
      c_row[j] += acc;
    }
  }
}

// C(M x N) += A^T * B where A is (K x M) and B is (K x N), row-major.
template <typename T>
void gemm_tn(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C) {
  for (int64_t k = 0; k < K; ++k) {
    const T* a_row = A + k * M;
    const T* b_row = B + k * N;
    for (int64_t i = 0; i < M; ++i) {
      const T a = a_row[i];
      if (a == T(0)) continue;
      T* c_row = C + i * N;
      for (int64_t j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride,
                            int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Unrolls one image (C x H x W) into a (C*kh*kw) x (oh*ow) column matrix.
template <typename T>
void im2col(const T* img, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, int64_t oh, int64_t ow,
            T* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        T* row = col + ((c * kh + ky) * kw + kx) * (oh * ow);
        for (int64_t y = 0; y < oh; ++y) {
          const int64_t iy = y * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(row + y * ow, row + (y + 1) * ow, T(0));
            continue;
          }
          const T* src = img + (c * H + iy) * W;
          for (int64_t x = 0; x < ow; ++x) {
            const int64_t ix = x * stride - pad + kx;
            row[y * ow + x] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-adds a column matrix back into image layout (transpose of im2col).
template <typename T>
void col2im(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, int64_t oh, int64_t ow,
            T* img) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const T* row = col + ((c * kh + ky) * kw + kx) * (oh * ow);
        for (int64_t y = 0; y < oh; ++y) {
          const int64_t iy = y * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          T* dst = img + (c * H + iy) * W;
          for (int64_t x = 0; x < ow; ++x) {
            const int64_t ix = x * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += row[y * ow + x];
          }
        }
      }
    }
  }
}

// Cross-correlation, NCHW. weight is (cout, cin, kh, kw), bias (cout).
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& weight,
                          const TensorT<T>& bias, int64_t stride,
                          int64_t pad) {
  const Shape4& xs = x.shape;
  const Shape4& ws = weight.shape;
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (pad < 0) throw ValueError("conv2d: padding must be >= 0");
  if (ws.c != xs.c)
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) +
                     " do not match weight " + std::to_string(ws.c));
  if (bias.shape.elems() != ws.n)
    throw ShapeError("conv2d: bias size does not match output channels");
  const int64_t oh = conv_out_dim(xs.h, ws.h, stride, pad);
  const int64_t ow = conv_out_dim(xs.w, ws.w, stride, pad);
  if (oh < 1 || ow < 1)
    throw ShapeError("conv2d: non-positive output dims for input " +
                     xs.str() + " kernel " + ws.str());

  TensorT<T> out(Shape4(xs.n, ws.n, oh, ow));
  const int64_t K = xs.c * ws.h * ws.w;
  const int64_t N = oh * ow;
  std::vector<T> col(static_cast<size_t>(K * N));
  for (int64_t n = 0; n < xs.n; ++n) {
    im2col(x.data.data() + n * xs.c * xs.h * xs.w, xs.c, xs.h, xs.w, ws.h,
           ws.w, stride, pad, oh, ow, col.data());
    T* o = out.data.data() + n * ws.n * N;
    for (int64_t co = 0; co < ws.n; ++co)
      std::fill(o + co * N, o + (co + 1) * N, bias.data[co]);
    gemm_nn(ws.n, K, N, weight.data.data(), col.data(), o);
  }
  return out;
}

// Accumulates gradients; dx/dw/db may be null when not needed.
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& weight,
                     const TensorT<T>& dy, int64_t stride, int64_t pad,
                     TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
  const Shape4& xs = x.shape;
  const Shape4& ws = weight.shape;
  const int64_t oh = dy.shape.h, ow = dy.shape.w;
  const int64_t K = xs.c * ws.h * ws.w;
  const int64_t N = oh * ow;
  std::vector<T> col(static_cast<size_t>(K * N));
  std::vector<T> dcol;
  if (dx) dcol.assign(static_cast<size_t>(K * N), T(0));

  for (int64_t n = 0; n < xs.n; ++n) {
    const T* dy_n = dy.data.data() + n * ws.n * N;
    if (dw || dx)
      im2col(x.data.data() + n * xs.c * xs.h * xs.w, xs.c, xs.h, xs.w, ws.h,
             ws.w, stride, pad, oh, ow, col.data());
    if (db) {
      for (int64_t co = 0; co < ws.n; ++co) {
        T acc = T(0);
        for (int64_t i = 0; i < N; ++i) acc += dy_n[co * N + i];
        db->data[co] += acc;
      }
    }
    if (dw) gemm_nt(ws.n, N, K, dy_n, col.data(), dw->data.data());
    if (dx) {
      std::fill(dcol.begin(), dcol.end(), T(0));
      gemm_tn(K, ws.n, N, weight.data.data(), dy_n, dcol.data());
      col2im(dcol.data(), xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad, oh, ow,
             dx->data.data() + n * xs.c * xs.h * xs.w);
    }
  }
}

// Source coordinate for bilinear scaling, align-corners=false.
inline double bilinear_src(int64_t dst, double scale) {
  double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  return s < 0.0 ? 0.0 : s;
}

struct BilinearTap {
  int64_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<BilinearTap> bilinear_taps(int64_t out_dim,
                                              int64_t in_dim) {
  std::vector<BilinearTap> taps(static_cast<size_t>(out_dim));
  const double scale = static_cast<double>(in_dim) / out_dim;
  for (int64_t i = 0; i < out_dim; ++i) {
    double s = bilinear_src(i, scale);
    int64_t i0 = std::min(static_cast<int64_t>(s), in_dim - 1);
    taps[i] = {i0, std::min(i0 + 1, in_dim - 1), s - static_cast<double>(i0)};
  }
  return taps;
}

template <typename T>
TensorT<T> resize_bilinear_t(const TensorT<T>& x, int64_t th, int64_t tw) {
  if (th < 1 || tw < 1) throw ValueError("resize_bilinear: bad target size");
  const Shape4& s = x.shape;
  TensorT<T> out(Shape4(s.n, s.c, th, tw));
  const auto ty = bilinear_taps(th, s.h);
  const auto tx = bilinear_taps(tw, s.w);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const T* src = x.data.data() + (n * s.c + c) * s.h * s.w;
      T* dst = out.data.data() + (n * s.c + c) * th * tw;
      for (int64_t y = 0; y < th; ++y) {
        const auto& a = ty[y];
        for (int64_t xi = 0; xi < tw; ++xi) {
          const auto& b = tx[xi];
          double v00 = src[a.i0 * s.w + b.i0];
          double v01 = src[a.i0 * s.w + b.i1];
          double v10 = src[a.i1 * s.w + b.i0];
          double v11 = src[a.i1 * s.w + b.i1];
          double top = v00 + (v01 - v00) * b.w1;
          double bot = v10 + (v11 - v10) * b.w1;
          dst[y * tw + xi] = static_cast<T>(top + (bot - top) * a.w1);
        }
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> upsample_bilinear_forward(const TensorT<T>& x, int64_t factor) {
  if (factor < 2) throw ValueError("upsample_bilinear: factor must be >= 2");
  return resize_bilinear_t(x, x.shape.h * factor, x.shape.w * factor);
}

// Transpose of the interpolation: scatter-add dy through the same taps.
template <typename T>
void upsample_bilinear_backward(const Shape4& in_shape, const TensorT<T>& dy,
                                int64_t factor, TensorT<T>* dx) {
  const int64_t th = in_shape.h * factor, tw = in_shape.w * factor;
  const auto ty = bilinear_taps(th, in_shape.h);
  const auto tx = bilinear_taps(tw, in_shape.w);
  for (int64_t n = 0; n < in_shape.n; ++n) {
    for (int64_t c = 0; c < in_shape.c; ++c) {
      T* dst = dx->data.data() + (n * in_shape.c + c) * in_shape.h * in_shape.w;
      const T* src = dy.data.data() + (n * in_shape.c + c) * th * tw;
      for (int64_t y = 0; y < th; ++y) {
        const auto& a = ty[y];
        for (int64_t xi = 0; xi < tw; ++xi) {
          const auto& b = tx[xi];
          const double g = src[y * tw + xi];
          dst[a.i0 * in_shape.w + b.i0] +=
              static_cast<T>(g * (1.0 - a.w1) * (1.0 - b.w1));
          dst[a.i0 * in_shape.w + b.i1] += static_cast<T>(g * (1.0 - a.w1) * b.w1);
          dst[a.i1 * in_shape.w + b.i0] += static_cast<T>(g * a.w1 * (1.0 - b.w1));
          dst[a.i1 * in_shape.w + b.i1] += static_cast<T>(g * a.w1 * b.w1);
        }
      }
    }
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                   : std::exp(x) / (T(1) + std::exp(x));
}

// Softmax cross-entropy over class logits, averaged over non-ignored
// pixels. Returns the loss; writes (softmax - onehot) / n_valid into
// dlogits when requested.
template <typename T>
double softmax_xent_forward_backward(const TensorT<T>& logits,
                                     const LabelMask& labels,
                                     std::optional<int32_t> ignore_label,
                                     TensorT<T>* dlogits) {
  const Shape4& s = logits.shape;
  const int64_t C = s.c;
  if (labels.n != s.n || labels.h != s.h || labels.w != s.w)
    throw ShapeError("softmax_xent: label grid " + std::to_string(labels.n) +
                     "x" + std::to_string(labels.h) + "x" +
                     std::to_string(labels.w) + " does not match logits " +
                     s.str());

  // Count valid pixels first: the gradient needs 1/n_valid.
  int64_t n_valid = 0;
  for (int32_t lab : labels.data) {
    if (ignore_label && lab == *ignore_label) continue;
    if (lab < 0 || lab >= C)
      throw DataError("softmax_xent: label " + std::to_string(lab) +
                      " out of range [0," + std::to_string(C) + ")");
    ++n_valid;
  }
  if (n_valid == 0)
    throw DataError("softmax_xent: no valid (non-ignored) pixels");

  const int64_t plane = s.h * s.w;
  double loss_sum = 0.0;
  std::vector<T> probs(static_cast<size_t>(C));
  for (int64_t n = 0; n < s.n; ++n) {
    const T* base = logits.data.data() + n * C * plane;
    T* dbase = dlogits ? dlogits->data.data() + n * C * plane : nullptr;
    for (int64_t p = 0; p < plane; ++p) {
      const int32_t lab = labels.data[static_cast<size_t>(n * plane + p)];
      if (ignore_label && lab == *ignore_label) continue;
      T mx = base[p];
      for (int64_t c = 1; c < C; ++c) mx = std::max(mx, base[c * plane + p]);
      T denom = T(0);
      for (int64_t c = 0; c < C; ++c) {
        probs[c] = std::exp(base[c * plane + p] - mx);
        denom += probs[c];
      }
      const double log_denom = std::log(static_cast<double>(denom));
      loss_sum += log_denom -
                  static_cast<double>(base[lab * plane + p] - mx);
      if (dbase) {
        const T inv = T(1) / (denom * static_cast<T>(n_valid));
        for (int64_t c = 0; c < C; ++c)
          dbase[c * plane + p] += probs[c] * inv;
        dbase[lab * plane + p] -= T(1) / static_cast<T>(n_valid);
      }
    }
  }
  return loss_sum / static_cast<double>(n_valid);
}

}  // namespace msfcn

#endif
