#ifndef MSFCN_FUSION_HPP
#define MSFCN_FUSION_HPP

// The two temporal mechanisms: multi-stream fusion (channel concat of the
// per-frame pyramids + per-level 1x1 reduction back to single-stream
// width) and recurrent fusion (ConvLSTM over the conv5 sequence, concat +
// 3x3 conv merges for conv4/conv3). Stream order is oldest frame first,
// current frame last.

#include <string>
#include <vector>

#include "msfcn/encoder.hpp"
#include "msfcn/layers.hpp"

namespace msfcn {

inline std::vector<std::pair<std::string, Shape4>> fusion_param_shapes(
    const EncoderConfig& cfg, int64_t order, const std::string& prefix) {
  std::vector<std::pair<std::string, Shape4>> out;
  const char* levels[3] = {"conv3", "conv4", "conv5"};
  for (int l = 0; l < 3; ++l) {
    const int64_t c = cfg.stage_channels[l];
    detail::append_conv(out, prefix + "." + levels[l], c, order * c, 1);
  }
  return out;
}

inline std::vector<std::pair<std::string, Shape4>> recurrent_param_shapes(
    const EncoderConfig& cfg, const std::string& prefix) {
  std::vector<std::pair<std::string, Shape4>> out;
  const int64_t c3 = cfg.stage_channels[0];
  const int64_t c4 = cfg.stage_channels[1];
  const int64_t c5 = cfg.stage_channels[2];
  // hidden channel count = conv5 channels, gates over concat(x, h)
  out.emplace_back(prefix + ".lstm.weight", Shape4(4 * c5, 2 * c5, 3, 3));
  out.emplace_back(prefix + ".lstm.bias", Shape4(4 * c5, 1, 1, 1));
  detail::append_conv(out, prefix + ".merge4", c4, 2 * c4, 3);
  detail::append_conv(out, prefix + ".merge3", c3, 2 * c3, 3);
  return out;
}

template <typename T>
void check_streams(const GraphT<T>& g, const std::vector<PyramidRefs>& pyrs) {
  if (pyrs.size() < 2)
    throw ValueError("fusion: need at least 2 streams, got " +
                     std::to_string(pyrs.size()));
  for (const auto& p : pyrs) {
    if (g.value(p.conv3).shape != g.value(pyrs[0].conv3).shape ||
        g.value(p.conv4).shape != g.value(pyrs[0].conv4).shape ||
        g.value(p.conv5).shape != g.value(pyrs[0].conv5).shape)
      throw ShapeError("fusion: pyramids are not shape-identical");
  }
}

// Per level: conv1x1(concat(level of each stream, oldest first)).
// Output pyramid has single-stream channel widths.
template <typename T>
PyramidRefs fuse_streams(GraphT<T>& g, const std::vector<PyramidRefs>& pyrs,
                         ParamStoreT<T>& params, const std::string& prefix) {
  check_streams(g, pyrs);
  auto fuse_level = [&](auto level_of, const char* name) {
    std::vector<ValueRef> parts;
    for (const auto& p : pyrs) parts.push_back(level_of(p));
    ValueRef cat = g.concat(parts);
    return g.conv1x1(cat,
                     g.param(params.at(prefix + "." + name + ".weight")),
                     g.param(params.at(prefix + "." + name + ".bias")));
  };
  PyramidRefs out{};
  out.conv3 = fuse_level([](const PyramidRefs& p) { return p.conv3; }, "conv3");
  out.conv4 = fuse_level([](const PyramidRefs& p) { return p.conv4; }, "conv4");
  out.conv5 = fuse_level([](const PyramidRefs& p) { return p.conv5; }, "conv5");
  return out;
}

// conv5: final hidden state of the ConvLSTM run over all K conv5 maps from
// a zero state. conv4/conv3: 3x3 conv over the concat of the last two
// frames' maps (two-stream semantics regardless of K).
template <typename T>
PyramidRefs recurrent_fuse(GraphT<T>& g, const std::vector<PyramidRefs>& pyrs,
                           ParamStoreT<T>& params, const std::string& prefix) {
  check_streams(g, pyrs);
  const Shape4 c5s = g.value(pyrs[0].conv5).shape;
  LstmStateRefs state{g.input(TensorT<T>(c5s)), g.input(TensorT<T>(c5s))};
  ValueRef w = g.param(params.at(prefix + ".lstm.weight"));
  ValueRef b = g.param(params.at(prefix + ".lstm.bias"));
  for (const auto& p : pyrs) state = conv_lstm_step(g, p.conv5, state, w, b);

  const size_t k = pyrs.size();
  auto merge = [&](ValueRef prev, ValueRef cur, const char* name) {
    ValueRef cat = g.concat({prev, cur});
    return g.conv2d(cat, g.param(params.at(prefix + "." + name + ".weight")),
                    g.param(params.at(prefix + "." + name + ".bias")), 1, 1);
  };
  PyramidRefs out{};
  out.conv5 = state.h;
  out.conv4 = merge(pyrs[k - 2].conv4, pyrs[k - 1].conv4, "merge4");
  out.conv3 = merge(pyrs[k - 2].conv3, pyrs[k - 1].conv3, "merge3");
  return out;
}

// Value-level wrappers over throwaway graphs.
template <typename T>
FeaturePyramidT<T> fuse_streams(const std::vector<FeaturePyramidT<T>>& pyrs,
                                ParamStoreT<T>& params,
                                const std::string& prefix) {
  GraphT<T> g;
  std::vector<PyramidRefs> refs;
  for (const auto& p : pyrs)
    refs.push_back(
        {g.input(p.conv3), g.input(p.conv4), g.input(p.conv5)});
  PyramidRefs out = fuse_streams(g, refs, params, prefix);
  return {g.value(out.conv3), g.value(out.conv4), g.value(out.conv5)};
}

template <typename T>
FeaturePyramidT<T> recurrent_fuse(const std::vector<FeaturePyramidT<T>>& pyrs,
                                  ParamStoreT<T>& params,
                                  const std::string& prefix) {
  GraphT<T> g;
  std::vector<PyramidRefs> refs;
  for (const auto& p : pyrs)
    refs.push_back(
        {g.input(p.conv3), g.input(p.conv4), g.input(p.conv5)});
  PyramidRefs out = recurrent_fuse(g, refs, params, prefix);
  return {g.value(out.conv3), g.value(out.conv4), g.value(out.conv5)};
}

// Fusion weights that copy one stream's block through the 1x1 conv and
// zero all others. With pick = K-1 an MSFCN collapses onto the
// single-frame network, which the equivalence tests exploit.
template <typename T>
TensorT<T> make_selector_fusion_weight(int64_t k, int64_t channels,
                                       int64_t pick) {
  if (pick < 0 || pick >= k) throw ValueError("selector: pick out of range");
  TensorT<T> w(Shape4(channels, k * channels, 1, 1));
  for (int64_t c = 0; c < channels; ++c)
    w.at(c, pick * channels + c, 0, 0) = T(1);
  return w;
}

}  // namespace msfcn

#endif
