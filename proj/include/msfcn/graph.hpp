#ifndef MSFCN_GRAPH_HPP
#define MSFCN_GRAPH_HPP

// Reverse-mode autodiff over a dynamically recorded tape. Nodes are
// appended in execution order, which is already a topological order, so
// backward() is a single reverse sweep. Gradients are accumulated
// additively; a parameter used by several nodes (tied encoders, reused
// LSTM weights) receives the sum of all contributions.

#include <functional>
#include <optional>
#include <vector>

#include "msfcn/kernels.hpp"
#include "msfcn/params.hpp"
#include "msfcn/tensor.hpp"

namespace msfcn {

struct ValueRef {
  int32_t id = -1;
};

template <typename T>
class GraphT {
 public:
  using Ten = TensorT<T>;

  // --- leaves ---

  ValueRef input(Ten v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, {}, nullptr);
  }

  ValueRef param(ParamT<T>& p) {
    return push(p.value, true, {}, nullptr, &p);
  }

  // --- elementwise ---

  ValueRef relu(ValueRef x) {
    Ten out = val(x);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return unary(x, std::move(out), [](const Ten& y, const Ten& dy, Ten& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i)
        if (y.data[i] > T(0)) dx.data[i] += dy.data[i];
    });
  }

  ValueRef sigmoid(ValueRef x) {
    Ten out = val(x);
    for (auto& v : out.data) v = sigmoid_scalar(v);
    return unary(x, std::move(out), [](const Ten& y, const Ten& dy, Ten& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] += dy.data[i] * y.data[i] * (T(1) - y.data[i]);
    });
  }

  ValueRef tanh(ValueRef x) {
    Ten out = val(x);
    for (auto& v : out.data) v = std::tanh(v);
    return unary(x, std::move(out), [](const Ten& y, const Ten& dy, Ten& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] += dy.data[i] * (T(1) - y.data[i] * y.data[i]);
    });
  }

  ValueRef add(ValueRef a, ValueRef b) {
    const Ten& ta = val(a);
    const Ten& tb = val(b);
    if (ta.shape != tb.shape)
      throw ShapeError("add: shape mismatch " + ta.shape.str() + " vs " +
                       tb.shape.str());
    Ten out = ta;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
    int ia = a.id, ib = b.id;
    return push(std::move(out), needs(a) || needs(b), {a.id, b.id},
                [ia, ib](GraphT& g, int self) {
                  const Ten& dy = g.nodes_[self].grad;
                  if (Ten* da = g.grad_slot(ia))
                    for (size_t i = 0; i < dy.data.size(); ++i)
                      da->data[i] += dy.data[i];
                  if (Ten* db = g.grad_slot(ib))
                    for (size_t i = 0; i < dy.data.size(); ++i)
                      db->data[i] += dy.data[i];
                });
  }

  ValueRef mul(ValueRef a, ValueRef b) {
    const Ten& ta = val(a);
    const Ten& tb = val(b);
    if (ta.shape != tb.shape)
      throw ShapeError("mul: shape mismatch " + ta.shape.str() + " vs " +
                       tb.shape.str());
    Ten out = ta;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
    int ia = a.id, ib = b.id;
    return push(std::move(out), needs(a) || needs(b), {a.id, b.id},
                [ia, ib](GraphT& g, int self) {
                  const Ten& dy = g.nodes_[self].grad;
                  const Ten& va = g.nodes_[ia].value;
                  const Ten& vb = g.nodes_[ib].value;
                  if (Ten* da = g.grad_slot(ia))
                    for (size_t i = 0; i < dy.data.size(); ++i)
                      da->data[i] += dy.data[i] * vb.data[i];
                  if (Ten* db = g.grad_slot(ib))
                    for (size_t i = 0; i < dy.data.size(); ++i)
                      db->data[i] += dy.data[i] * va.data[i];
                });
  }

  // --- structure ---

  ValueRef concat(const std::vector<ValueRef>& parts) {
    std::vector<Ten> vals;
    std::vector<int> ids;
    bool ng = false;
    for (ValueRef r : parts) {
      vals.push_back(val(r));
      ids.push_back(r.id);
      ng = ng || needs(r);
    }
    Ten out = concat_channels(vals);
    return push(std::move(out), ng, ids, [ids](GraphT& g, int self) {
      const Ten& dy = g.nodes_[self].grad;
      const Shape4& s = dy.shape;
      const int64_t plane = s.h * s.w;
      int64_t c_off = 0;
      for (int id : ids) {
        Ten* dp = g.grad_slot(id);
        const int64_t pc = g.nodes_[id].value.shape.c;
        if (dp) {
          for (int64_t n = 0; n < s.n; ++n) {
            const T* src = dy.data.data() + (n * s.c + c_off) * plane;
            T* dst = dp->data.data() + n * pc * plane;
            for (int64_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
          }
        }
        c_off += pc;
      }
    });
  }

  ValueRef slice(ValueRef x, int64_t lo, int64_t hi) {
    Ten out = slice_channels(val(x), lo, hi);
    int ix = x.id;
    return push(std::move(out), needs(x), {x.id},
                [ix, lo, hi](GraphT& g, int self) {
                  Ten* dx = g.grad_slot(ix);
                  if (!dx) return;
                  const Ten& dy = g.nodes_[self].grad;
                  const Shape4& xs = g.nodes_[ix].value.shape;
                  const int64_t plane = xs.h * xs.w;
                  for (int64_t n = 0; n < xs.n; ++n) {
                    const T* src = dy.data.data() + n * (hi - lo) * plane;
                    T* dst = dx->data.data() + (n * xs.c + lo) * plane;
                    for (int64_t i = 0; i < (hi - lo) * plane; ++i)
                      dst[i] += src[i];
                  }
                });
  }

  // --- convolution / resampling ---

  ValueRef conv2d(ValueRef x, ValueRef w, ValueRef b, int64_t stride,
                  int64_t pad) {
    Ten out = conv2d_forward(val(x), val(w), val(b), stride, pad);
    int ix = x.id, iw = w.id, ib = b.id;
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                {x.id, w.id, b.id}, [ix, iw, ib, stride, pad](GraphT& g,
                                                              int self) {
                  const Ten& dy = g.nodes_[self].grad;
                  conv2d_backward(g.nodes_[ix].value, g.nodes_[iw].value, dy,
                                  stride, pad, g.grad_slot(ix),
                                  g.grad_slot(iw), g.grad_slot(ib));
                });
  }

  ValueRef conv1x1(ValueRef x, ValueRef w, ValueRef b) {
    const Shape4& ws = val(w).shape;
    if (ws.h != 1 || ws.w != 1)
      throw ShapeError("conv1x1: weight kernel must be 1x1, got " + ws.str());
    return conv2d(x, w, b, 1, 0);
  }

  ValueRef upsample_bilinear(ValueRef x, int64_t factor) {
    Ten out = upsample_bilinear_forward(val(x), factor);
    int ix = x.id;
    return push(std::move(out), needs(x), {x.id},
                [ix, factor](GraphT& g, int self) {
                  Ten* dx = g.grad_slot(ix);
                  if (!dx) return;
                  upsample_bilinear_backward(g.nodes_[ix].value.shape,
                                             g.nodes_[self].grad, factor, dx);
                });
  }

  // --- reductions / loss ---

  ValueRef reduce_sum(ValueRef x) {
    const Ten& tx = val(x);
    double acc = 0.0;
    for (T v : tx.data) acc += static_cast<double>(v);
    Ten out(Shape4(1, 1, 1, 1));
    out.data[0] = static_cast<T>(acc);
    int ix = x.id;
    return push(std::move(out), needs(x), {x.id},
                [ix](GraphT& g, int self) {
                  Ten* dx = g.grad_slot(ix);
                  if (!dx) return;
                  const T gy = g.nodes_[self].grad.data[0];
                  for (auto& v : dx->data) v += gy;
                });
  }

  // Labels are captured by value; the mask is not differentiated.
  ValueRef softmax_cross_entropy(ValueRef logits, LabelMask labels,
                                 std::optional<int32_t> ignore_label = {}) {
    double loss =
        softmax_xent_forward_backward<T>(val(logits), labels, ignore_label,
                                         nullptr);
    Ten out(Shape4(1, 1, 1, 1));
    out.data[0] = static_cast<T>(loss);
    int il = logits.id;
    auto lab = std::make_shared<LabelMask>(std::move(labels));
    return push(std::move(out), needs(logits), {logits.id},
                [il, lab, ignore_label](GraphT& g, int self) {
                  Ten* dl = g.grad_slot(il);
                  if (!dl) return;
                  // grad of mean CE w.r.t. logits, scaled by upstream grad
                  const T gy = g.nodes_[self].grad.data[0];
                  if (gy == T(1)) {
                    softmax_xent_forward_backward<T>(g.nodes_[il].value, *lab,
                                                     ignore_label, dl);
                  } else {
                    Ten tmp(dl->shape);
                    softmax_xent_forward_backward<T>(g.nodes_[il].value, *lab,
                                                     ignore_label, &tmp);
                    for (size_t i = 0; i < dl->data.size(); ++i)
                      dl->data[i] += gy * tmp.data[i];
                  }
                });
  }

  // --- access / backward ---

  const Ten& value(ValueRef r) const { return nodes_[check(r)].value; }
  const Ten& grad(ValueRef r) const { return nodes_[check(r)].grad; }

  T scalar(ValueRef r) const {
    const Ten& v = value(r);
    if (v.elems() != 1) throw ContractError("scalar: node is not scalar");
    return v.data[0];
  }

  // Reverse sweep from a scalar loss. Parameter grads are accumulated
  // into their ParamT::grad slots (additive across calls).
  void backward(ValueRef loss) {
    const int lid = check(loss);
    if (nodes_[lid].value.elems() != 1)
      throw ContractError("backward: loss must be scalar, got shape " +
                          nodes_[lid].value.shape.str());
    if (!nodes_[lid].needs_grad) return;  // nothing reachable is trainable
    ensure_grad(lid);
    nodes_[lid].grad.data[0] += T(1);
    for (int id = lid; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.data.empty()) continue;
      if (n.backward_fn) n.backward_fn(*this, id);
      if (n.bound) {
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          n.bound->grad.data[i] += n.grad.data[i];
      }
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Ten value;
    Ten grad;  // empty until needed
    bool needs_grad = false;
    std::vector<int> parents;
    std::function<void(GraphT&, int)> backward_fn;
    ParamT<T>* bound = nullptr;
  };

  std::vector<Node> nodes_;

  int check(ValueRef r) const {
    if (r.id < 0 || r.id >= static_cast<int>(nodes_.size()))
      throw ContractError("invalid graph node reference");
    return r.id;
  }

  const Ten& val(ValueRef r) const { return nodes_[check(r)].value; }
  bool needs(ValueRef r) const { return nodes_[check(r)].needs_grad; }

  void ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Ten(n.value.shape);
  }

  // Returns the grad accumulator of a node, or null if it does not need
  // gradients; allocates lazily.
  Ten* grad_slot(int id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    ensure_grad(id);
    return &n.grad;
  }

  ValueRef push(Ten value, bool needs_grad, std::vector<int> parents,
                std::function<void(GraphT&, int)> bwd,
                ParamT<T>* bound = nullptr) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.parents = std::move(parents);
    n.backward_fn = std::move(bwd);
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return ValueRef{static_cast<int32_t>(nodes_.size() - 1)};
  }

  template <typename BwdFn>
  ValueRef unary(ValueRef x, Ten out, BwdFn fn) {
    int ix = x.id;
    return push(std::move(out), needs(x), {x.id},
                [ix, fn](GraphT& g, int self) {
                  Ten* dx = g.grad_slot(ix);
                  if (!dx) return;
                  fn(g.nodes_[self].value, g.nodes_[self].grad, *dx);
                });
  }
};

using Graph = GraphT<float>;

}  // namespace msfcn

#endif
