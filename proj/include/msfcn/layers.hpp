#ifndef MSFCN_LAYERS_HPP
#define MSFCN_LAYERS_HPP

#include <optional>
#include <utility>

#include "msfcn/graph.hpp"

namespace msfcn {

// Hidden/cell maps of a convolutional LSTM. Both share the spatial size
// of the conv5 feature map they filter.
template <typename T>
struct ConvLstmStateT {
  TensorT<T> h;
  TensorT<T> c;
};
using ConvLstmState = ConvLstmStateT<float>;

// Graph-level state: node references instead of tensors, so BPTT falls
// out of the ordinary reverse sweep.
struct LstmStateRefs {
  ValueRef h;
  ValueRef c;
};

// One ConvLSTM step. All four gates come from a single 3x3 convolution
// over concat(x, h); gate channel order is [input, forget, cell, output].
//   c' = f*c + i*g,  h' = o * tanh(c')
template <typename T>
LstmStateRefs conv_lstm_step(GraphT<T>& g, ValueRef x, LstmStateRefs state,
                             ValueRef gate_weight, ValueRef gate_bias) {
  const Shape4& xs = g.value(x).shape;
  const Shape4& hs = g.value(state.h).shape;
  if (xs.n != hs.n || xs.h != hs.h || xs.w != hs.w)
    throw ShapeError("conv_lstm_step: input " + xs.str() +
                     " does not match state " + hs.str());
  const int64_t hc = hs.c;
  if (g.value(gate_weight).shape.n != 4 * hc)
    throw ShapeError("conv_lstm_step: gate weight must have 4*hidden output "
                     "channels");
  ValueRef z = g.concat({x, state.h});
  ValueRef gates = g.conv2d(z, gate_weight, gate_bias, 1, 1);
  ValueRef i = g.sigmoid(g.slice(gates, 0, hc));
  ValueRef f = g.sigmoid(g.slice(gates, hc, 2 * hc));
  ValueRef cand = g.tanh(g.slice(gates, 2 * hc, 3 * hc));
  ValueRef o = g.sigmoid(g.slice(gates, 3 * hc, 4 * hc));
  ValueRef c_next = g.add(g.mul(f, state.c), g.mul(i, cand));
  ValueRef h_next = g.mul(o, g.tanh(c_next));
  return {h_next, c_next};
}

// Value-level wrapper matching the step contract directly.
template <typename T>
ConvLstmStateT<T> conv_lstm_step(const TensorT<T>& x,
                                 const ConvLstmStateT<T>& state,
                                 const TensorT<T>& gate_weight,
                                 const TensorT<T>& gate_bias) {
  GraphT<T> g;
  LstmStateRefs s{g.input(state.h), g.input(state.c)};
  LstmStateRefs next = conv_lstm_step(g, g.input(x), s, g.input(gate_weight),
                                      g.input(gate_bias));
  return {g.value(next.h), g.value(next.c)};
}

}  // namespace msfcn

#endif
