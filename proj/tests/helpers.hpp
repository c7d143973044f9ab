#pragma once

// Shared test utilities: independent oracles (direct-loop convolution, scalar
// bilinear/LSTM/Adam references, brute-force metric recounts) and the
// finite-difference gradient checker. Everything here is written from the
// mathematical definitions, deliberately avoiding the library's im2col/GEMM
// and graph machinery, so agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "msfcn/graph.hpp"
#include "msfcn/metrics.hpp"
#include "msfcn/params.hpp"
#include "msfcn/rng.hpp"
#include "msfcn/tensor.hpp"

namespace testing {

using msfcn::LabelMask;
using msfcn::Rng;
using msfcn::Shape4;
using msfcn::Tensor;
using msfcn::TensorT;

template <typename T>
TensorT<T> random_tensor(Shape4 shape, uint64_t seed, double scale = 1.0) {
  TensorT<T> t(shape);
  Rng rng(seed);
  for (auto& v : t.data) v = static_cast<T>(scale * rng.normal());
  return t;
}

// keeps values away from the relu kink so finite differences stay clean
template <typename T>
void nudge_off_zero(TensorT<T>& t, double margin = 0.05) {
  for (auto& v : t.data) {
    double d = static_cast<double>(v);
    if (std::abs(d) < margin) v = static_cast<T>(d + 2 * margin);
  }
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) -
                             static_cast<double>(b.data[i])));
  return m;
}

// ---------------------------------------------------------------------------
// direct-loop convolution oracle

template <typename T>
TensorT<T> conv2d_direct(const TensorT<T>& x, const TensorT<T>& w,
                         const TensorT<T>& b, int64_t stride, int64_t pad) {
  const Shape4& xs = x.shape;
  const Shape4& ws = w.shape;
  const int64_t oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int64_t ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  TensorT<T> y(Shape4(xs.n, ws.n, oh, ow));
  for (int64_t n = 0; n < xs.n; ++n)
    for (int64_t co = 0; co < ws.n; ++co)
      for (int64_t yo = 0; yo < oh; ++yo)
        for (int64_t xo = 0; xo < ow; ++xo) {
          double acc = static_cast<double>(b.data[static_cast<size_t>(co)]);
          for (int64_t ci = 0; ci < xs.c; ++ci)
            for (int64_t ky = 0; ky < ws.h; ++ky)
              for (int64_t kx = 0; kx < ws.w; ++kx) {
                int64_t iy = yo * stride + ky - pad;
                int64_t ix = xo * stride + kx - pad;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += static_cast<double>(x.at(n, ci, iy, ix)) *
                       static_cast<double>(w.at(co, ci, ky, kx));
              }
          y.at(n, co, yo, xo) = static_cast<T>(acc);
        }
  return y;
}

// ---------------------------------------------------------------------------
// scalar bilinear reference (align_corners=false convention)

template <typename T>
TensorT<T> resize_bilinear_direct(const TensorT<T>& x, int64_t th,
                                  int64_t tw) {
  const Shape4& s = x.shape;
  const double sy = static_cast<double>(s.h) / th;
  const double sx = static_cast<double>(s.w) / tw;
  TensorT<T> y(Shape4(s.n, s.c, th, tw));
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t yo = 0; yo < th; ++yo)
        for (int64_t xo = 0; xo < tw; ++xo) {
          double fy = std::max(0.0, (yo + 0.5) * sy - 0.5);
          double fx = std::max(0.0, (xo + 0.5) * sx - 0.5);
          int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), s.h - 1);
          int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), s.w - 1);
          int64_t y1 = std::min<int64_t>(y0 + 1, s.h - 1);
          int64_t x1 = std::min<int64_t>(x0 + 1, s.w - 1);
          double ty = fy - y0, tx = fx - x0;
          double v = (1 - ty) * ((1 - tx) * x.at(n, c, y0, x0) +
                                 tx * x.at(n, c, y0, x1)) +
                     ty * ((1 - tx) * x.at(n, c, y1, x0) +
                           tx * x.at(n, c, y1, x1));
          y.at(n, c, yo, xo) = static_cast<T>(v);
        }
  return y;
}

// ---------------------------------------------------------------------------
// scalar LSTM cell (gate order i, f, g, o)

struct ScalarLstmWeights {
  // per gate: input weight, hidden weight, bias
  double wi[4], wh[4], b[4];
};

struct ScalarLstmState {
  double h = 0, c = 0;
};

inline ScalarLstmState scalar_lstm_step(double x, ScalarLstmState s,
                                        const ScalarLstmWeights& w) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double pre[4];
  for (int g = 0; g < 4; ++g) pre[g] = w.wi[g] * x + w.wh[g] * s.h + w.b[g];
  double i = sig(pre[0]), f = sig(pre[1]);
  double cand = std::tanh(pre[2]), o = sig(pre[3]);
  ScalarLstmState out;
  out.c = f * s.c + i * cand;
  out.h = o * std::tanh(out.c);
  return out;
}

// general ConvLSTM reference built on the direct-loop conv
template <typename T>
void conv_lstm_direct(const TensorT<T>& x, TensorT<T>& h, TensorT<T>& c,
                      const TensorT<T>& w, const TensorT<T>& b) {
  const int64_t hc = h.shape.c;
  TensorT<T> z = msfcn::concat_channels<T>({x, h});
  TensorT<T> gates = conv2d_direct(z, w, b, 1, 1);
  const int64_t plane = gates.shape.h * gates.shape.w;
  for (int64_t n = 0; n < gates.shape.n; ++n)
    for (int64_t ch = 0; ch < hc; ++ch)
      for (int64_t p = 0; p < plane; ++p) {
        auto gate = [&](int64_t which) {
          return static_cast<double>(
              gates.data[static_cast<size_t>(
                  ((n * 4 * hc) + which * hc + ch) * plane + p)]);
        };
        double i = 1.0 / (1.0 + std::exp(-gate(0)));
        double f = 1.0 / (1.0 + std::exp(-gate(1)));
        double cand = std::tanh(gate(2));
        double o = 1.0 / (1.0 + std::exp(-gate(3)));
        size_t idx = static_cast<size_t>((n * hc + ch) * plane + p);
        double cn = f * c.data[idx] + i * cand;
        c.data[idx] = static_cast<T>(cn);
        h.data[idx] = static_cast<T>(o * std::tanh(cn));
      }
}

// ---------------------------------------------------------------------------
// scalar Adam (f32 state, per-step double arithmetic, like production)

struct ScalarAdam {
  float m = 0, v = 0;
  uint64_t t = 0;
  float step(float theta, double g, double lr = 1e-3, double b1 = 0.9,
             double b2 = 0.999, double eps = 1e-8) {
    t += 1;
    m = static_cast<float>(b1 * m + (1 - b1) * g);
    v = static_cast<float>(b2 * v + (1 - b2) * g * g);
    double mh = m / (1.0 - std::pow(b1, static_cast<double>(t)));
    double vh = v / (1.0 - std::pow(b2, static_cast<double>(t)));
    return static_cast<float>(theta - lr * mh / (std::sqrt(vh) + eps));
  }
};

// ---------------------------------------------------------------------------
// brute-force segmentation metrics (definition-level recount)

struct BruteMetrics {
  std::vector<int64_t> tp, fp, fn;
  std::vector<double> iou;          // -1 marks "absent from gt and pred"
  double mean_iou = 0;
  double pixel_accuracy = 0;
};

inline BruteMetrics brute_force_metrics(const std::vector<LabelMask>& preds,
                                        const std::vector<LabelMask>& gts,
                                        int64_t num_classes) {
  BruteMetrics r;
  r.tp.assign(num_classes, 0);
  r.fp.assign(num_classes, 0);
  r.fn.assign(num_classes, 0);
  int64_t correct = 0, total = 0;
  for (size_t s = 0; s < gts.size(); ++s)
    for (size_t i = 0; i < gts[s].data.size(); ++i) {
      int32_t g = gts[s].data[i], p = preds[s].data[i];
      ++total;
      if (g == p) ++correct;
      for (int64_t c = 0; c < num_classes; ++c) {
        if (g == c && p == c) ++r.tp[c];
        if (g != c && p == c) ++r.fp[c];
        if (g == c && p != c) ++r.fn[c];
      }
    }
  double sum = 0;
  int64_t present = 0;
  r.iou.assign(num_classes, -1.0);
  for (int64_t c = 0; c < num_classes; ++c) {
    int64_t denom = r.tp[c] + r.fp[c] + r.fn[c];
    if (denom == 0) continue;
    r.iou[c] = static_cast<double>(r.tp[c]) / denom;
    sum += r.iou[c];
    ++present;
  }
  r.mean_iou = sum / present;
  r.pixel_accuracy = static_cast<double>(correct) / total;
  return r;
}

inline LabelMask random_mask(int64_t h, int64_t w, int64_t num_classes,
                             uint64_t seed) {
  LabelMask m(1, h, w);
  Rng rng(seed);
  for (auto& v : m.data)
    v = static_cast<int32_t>(rng.uniform_int(0, num_classes - 1));
  return m;
}

// ---------------------------------------------------------------------------
// finite-difference gradient checker (64-bit recompute)

struct GradCheckResult {
  double max_rel_err = 0;
  int64_t coords = 0;   // coordinates actually compared
  int64_t skipped = 0;  // coordinates rejected by the smoothness probe
  std::string worst;    // "param[idx]" of the worst coordinate
};

// build() records the forward pass on the given graph and returns a scalar
// loss value-ref; it must be a pure function of the store's current values.
//
// Central differences only estimate a derivative where the loss is locally
// smooth. A relu kink inside the stencil makes the estimate an arbitrary
// mixture of the one-sided slopes, so such coordinates are useless as an
// oracle (not evidence of a gradient bug). We detect them by evaluating the
// stencil at two widths: smooth coordinates agree to O(eps^2), a crossed
// kink shifts the two estimates against each other. Rejected coordinates
// are resampled; the caller asserts that enough survived.
template <typename BuildFn>
GradCheckResult gradcheck(msfcn::ParamStoreT<double>& params, BuildFn build,
                          int64_t min_coords, uint64_t seed,
                          double eps = 1e-3) {
  // analytic gradients, one recorded tape
  params.zero_grads();
  {
    msfcn::GraphT<double> g;
    msfcn::ValueRef loss = build(g);
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (size_t i = 0; i < params.size(); ++i) {
    analytic.emplace_back(params[i].grad.data.begin(),
                          params[i].grad.data.end());
  }

  auto loss_at = [&]() {
    msfcn::GraphT<double> g;
    return g.scalar(build(g));
  };

  // shuffled coordinate pool per parameter, drawn round-robin so the
  // sample spreads across the whole model
  Rng rng(seed);
  std::vector<std::vector<int64_t>> pools(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    auto& pool = pools[i];
    pool.resize(params[i].value.data.size());
    for (size_t k = 0; k < pool.size(); ++k)
      pool[k] = static_cast<int64_t>(k);
    for (size_t k = pool.size(); k > 1; --k)
      std::swap(pool[k - 1],
                pool[static_cast<size_t>(rng.uniform_int(0, k - 1))]);
  }

  GradCheckResult res;
  const int64_t max_attempts = 10 * min_coords;
  int64_t attempts = 0;
  bool any_left = true;
  while (res.coords < min_coords && any_left && attempts < max_attempts) {
    any_left = false;
    for (size_t i = 0; i < params.size() && res.coords < min_coords; ++i) {
      if (pools[i].empty()) continue;
      any_left = true;
      ++attempts;
      const int64_t idx = pools[i].back();
      pools[i].pop_back();

      auto& value = params[i].value.data;
      const double saved = value[static_cast<size_t>(idx)];
      auto probe = [&](double offset) {
        value[static_cast<size_t>(idx)] = saved + offset;
        double l = loss_at();
        value[static_cast<size_t>(idx)] = saved;
        return l;
      };
      const double wide = (probe(eps) - probe(-eps)) / (2 * eps);
      const double narrow =
          (probe(eps / 3) - probe(-eps / 3)) / (2 * eps / 3);
      if (std::abs(wide - narrow) >
          1e-3 * std::max({std::abs(wide), std::abs(narrow), 1e-4})) {
        ++res.skipped;
        continue;
      }

      const double a = analytic[i][static_cast<size_t>(idx)];
      const double rel = std::abs(a - wide) /
                         std::max({std::abs(a), std::abs(wide), 1e-6});
      ++res.coords;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = params[i].name + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return res;
}

}  // namespace testing
