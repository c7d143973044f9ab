#ifndef MSFCN_ENCODER_HPP
#define MSFCN_ENCODER_HPP

// Small residual encoder producing a conv3/conv4/conv5 pyramid at strides
// 8/16/32. Topology: 7x7 stride-2 stem conv, a 3x3 stride-2 conv in place
// of the pool, then three stages of residual blocks.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "msfcn/graph.hpp"

namespace msfcn {

struct EncoderConfig {
  int64_t in_channels = 3;
  std::array<int64_t, 3> stage_channels = {32, 64, 128};
  int64_t blocks_per_stage = 2;

  int64_t stem_channels() const {
    return std::max<int64_t>(8, stage_channels[0] / 2);
  }

  void validate() const {
    if (in_channels < 1) throw ValueError("EncoderConfig: in_channels < 1");
    if (blocks_per_stage < 1)
      throw ValueError("EncoderConfig: blocks_per_stage < 1");
    if (stage_channels[0] < 1 ||
        !(stage_channels[0] < stage_channels[1] &&
          stage_channels[1] < stage_channels[2]))
      throw ValueError(
          "EncoderConfig: stage channels must be positive and increasing");
  }

  bool operator==(const EncoderConfig& o) const {
    return in_channels == o.in_channels &&
           stage_channels == o.stage_channels &&
           blocks_per_stage == o.blocks_per_stage;
  }
};

// The three encoder taps exchanged between encoder, fusion and decoder.
template <typename T>
struct FeaturePyramidT {
  TensorT<T> conv3;  // stride 8
  TensorT<T> conv4;  // stride 16
  TensorT<T> conv5;  // stride 32
};
using FeaturePyramid = FeaturePyramidT<float>;

// Graph-level pyramid.
struct PyramidRefs {
  ValueRef conv3, conv4, conv5;
};

namespace detail {

inline void append_conv(std::vector<std::pair<std::string, Shape4>>& out,
                        const std::string& name, int64_t cout, int64_t cin,
                        int64_t k) {
  out.emplace_back(name + ".weight", Shape4(cout, cin, k, k));
  out.emplace_back(name + ".bias", Shape4(cout, 1, 1, 1));
}

}  // namespace detail

// Canonical (name, shape) list; a pure function of the config, shared by
// init, checkpointing and the parameter-count tests.
inline std::vector<std::pair<std::string, Shape4>> encoder_param_shapes(
    const EncoderConfig& cfg, const std::string& prefix) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape4>> out;
  const int64_t stem = cfg.stem_channels();
  detail::append_conv(out, prefix + ".stem.conv1", stem, cfg.in_channels, 7);
  detail::append_conv(out, prefix + ".stem.conv2", stem, stem, 3);
  int64_t cin = stem;
  for (int stage = 0; stage < 3; ++stage) {
    const int64_t cout = cfg.stage_channels[stage];
    for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string bp = prefix + ".stage" + std::to_string(stage + 1) +
                             ".block" + std::to_string(b);
      const int64_t bin = (b == 0) ? cin : cout;
      const int64_t stride = (b == 0) ? 2 : 1;
      detail::append_conv(out, bp + ".conv1", cout, bin, 3);
      detail::append_conv(out, bp + ".conv2", cout, cout, 3);
      if (bin != cout || stride != 1)
        detail::append_conv(out, bp + ".proj", cout, bin, 1);
    }
    cin = cout;
  }
  return out;
}

// y = relu(conv2(relu(conv1(x))) + proj(x)); proj is identity when the
// channel count and stride allow it, else a strided 1x1 conv.
template <typename T>
ValueRef residual_block(GraphT<T>& g, ValueRef x, ParamStoreT<T>& params,
                        const std::string& prefix, int64_t stride) {
  ValueRef y = g.conv2d(x, g.param(params.at(prefix + ".conv1.weight")),
                        g.param(params.at(prefix + ".conv1.bias")), stride, 1);
  y = g.relu(y);
  y = g.conv2d(y, g.param(params.at(prefix + ".conv2.weight")),
               g.param(params.at(prefix + ".conv2.bias")), 1, 1);
  ValueRef shortcut = x;
  if (params.has(prefix + ".proj.weight")) {
    shortcut = g.conv2d(x, g.param(params.at(prefix + ".proj.weight")),
                        g.param(params.at(prefix + ".proj.bias")), stride, 0);
  }
  return g.relu(g.add(y, shortcut));
}

template <typename T>
PyramidRefs encode(GraphT<T>& g, ValueRef frame, ParamStoreT<T>& params,
                   const std::string& prefix, const EncoderConfig& cfg) {
  const Shape4& s = g.value(frame).shape;
  if (s.c != cfg.in_channels)
    throw ShapeError("encode: expected " + std::to_string(cfg.in_channels) +
                     " input channels, got " + std::to_string(s.c));
  if (s.h % 32 != 0 || s.w % 32 != 0)
    throw ShapeError("encode: input dims must be divisible by 32, got " +
                     s.str());

  ValueRef x = g.conv2d(frame, g.param(params.at(prefix + ".stem.conv1.weight")),
                        g.param(params.at(prefix + ".stem.conv1.bias")), 2, 3);
  x = g.relu(x);
  x = g.conv2d(x, g.param(params.at(prefix + ".stem.conv2.weight")),
               g.param(params.at(prefix + ".stem.conv2.bias")), 2, 1);
  x = g.relu(x);

  PyramidRefs pyr{};
  for (int stage = 0; stage < 3; ++stage) {
    for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string bp = prefix + ".stage" + std::to_string(stage + 1) +
                             ".block" + std::to_string(b);
      x = residual_block(g, x, params, bp, b == 0 ? 2 : 1);
    }
    if (stage == 0) pyr.conv3 = x;
    if (stage == 1) pyr.conv4 = x;
    if (stage == 2) pyr.conv5 = x;
  }
  return pyr;
}

// Value-level convenience for tests: runs a throwaway graph.
template <typename T>
FeaturePyramidT<T> encode(const TensorT<T>& frame, ParamStoreT<T>& params,
                          const std::string& prefix,
                          const EncoderConfig& cfg) {
  GraphT<T> g;
  PyramidRefs p = encode(g, g.input(frame), params, prefix, cfg);
  return {g.value(p.conv3), g.value(p.conv4), g.value(p.conv5)};
}

}  // namespace msfcn

#endif
