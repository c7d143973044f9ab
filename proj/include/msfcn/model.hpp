#ifndef MSFCN_MODEL_HPP
#define MSFCN_MODEL_HPP

// Assembles the four architectures (FCN, MSFCN-2/3, RFCN-2) from encoder,
// fusion and a shared skip-connection decoder. Uniform interface: K
// frames in, per-pixel class logits at input resolution out.

#include <string>
#include <vector>

#include "msfcn/fusion.hpp"

namespace msfcn {

enum class ModelKind { FCN, MSFCN, RFCN };

inline const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::FCN: return "FCN";
    case ModelKind::MSFCN: return "MSFCN";
    case ModelKind::RFCN: return "RFCN";
  }
  return "?";
}

inline ModelKind kind_from_name(const std::string& s) {
  if (s == "FCN") return ModelKind::FCN;
  if (s == "MSFCN") return ModelKind::MSFCN;
  if (s == "RFCN") return ModelKind::RFCN;
  throw ValueError("unknown model kind: " + s);
}

struct ModelSpec {
  ModelKind kind = ModelKind::FCN;
  int64_t order = 1;  // frames consumed per prediction
  int64_t num_classes = 4;
  EncoderConfig encoder;
  bool tie_encoders = false;
  int64_t input_height = 64;
  int64_t input_width = 96;

  void validate() const {
    encoder.validate();
    switch (kind) {
      case ModelKind::FCN:
        if (order != 1) throw ValueError("FCN requires order 1");
        break;
      case ModelKind::MSFCN:
        if (order != 2 && order != 3)
          throw ValueError("MSFCN requires order 2 or 3");
        break;
      case ModelKind::RFCN:
        if (order != 2) throw ValueError("RFCN requires order 2");
        break;
    }
    if (num_classes < 2) throw ValueError("num_classes must be >= 2");
    if (input_height < 32 || input_width < 32 || input_height % 32 != 0 ||
        input_width % 32 != 0)
      throw ValueError("input size must be positive and divisible by 32");
  }

  std::string name() const {
    if (kind == ModelKind::FCN) return "FCN";
    return std::string(kind_name(kind)) + "-" + std::to_string(order);
  }

  // Encoder namespaces, one per stream (a single shared one when tied).
  std::vector<std::string> encoder_prefixes() const {
    if (tie_encoders || order == 1)
      return {order == 1 ? std::string("encoder0") : std::string("encoder")};
    std::vector<std::string> out;
    for (int64_t k = 0; k < order; ++k)
      out.push_back("encoder" + std::to_string(k));
    return out;
  }

  bool operator==(const ModelSpec& o) const {
    return kind == o.kind && order == o.order &&
           num_classes == o.num_classes && encoder == o.encoder &&
           tie_encoders == o.tie_encoders &&
           input_height == o.input_height && input_width == o.input_width;
  }
};

inline std::vector<std::pair<std::string, Shape4>> decoder_param_shapes(
    const ModelSpec& spec) {
  std::vector<std::pair<std::string, Shape4>> out;
  const auto& sc = spec.encoder.stage_channels;
  detail::append_conv(out, "decoder.fuse4", sc[1], sc[2] + sc[1], 3);
  detail::append_conv(out, "decoder.fuse3", sc[0], sc[1] + sc[0], 3);
  detail::append_conv(out, "decoder.classifier", spec.num_classes, sc[0], 1);
  return out;
}

// The full canonical parameter list; a pure function of the spec.
inline std::vector<std::pair<std::string, Shape4>> model_param_shapes(
    const ModelSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::string, Shape4>> out;
  for (const auto& prefix : spec.encoder_prefixes()) {
    auto enc = encoder_param_shapes(spec.encoder, prefix);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  if (spec.kind == ModelKind::MSFCN) {
    auto f = fusion_param_shapes(spec.encoder, spec.order, "fusion");
    out.insert(out.end(), f.begin(), f.end());
  } else if (spec.kind == ModelKind::RFCN) {
    auto r = recurrent_param_shapes(spec.encoder, "recurrent");
    out.insert(out.end(), r.begin(), r.end());
  }
  auto dec = decoder_param_shapes(spec);
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

struct Model {
  ModelSpec spec;
  ParamStore params;

  int64_t parameter_count() const { return params.total_elems(); }
};

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

// He-scaled normal for conv weights (stddev = sqrt(2/fan_in)), zero
// biases, forget-gate bias +1. Each parameter draws from its own stream
// keyed by (seed, name), so the layout of other parameters cannot shift
// its values.
inline Tensor init_param(const std::string& name, Shape4 shape,
                         uint64_t seed) {
  if (detail::ends_with(name, ".weight")) {
    const double fan_in =
        static_cast<double>(shape.c) * shape.h * shape.w;
    return randn(shape, mix_seed(seed, fnv1a64(name)),
                 std::sqrt(2.0 / fan_in));
  }
  Tensor t = zeros(shape);
  if (detail::ends_with(name, "lstm.bias")) {
    const int64_t hc = shape.n / 4;  // gate order: i, f, g, o
    for (int64_t i = hc; i < 2 * hc; ++i) t.data[i] = 1.0f;
  }
  return t;
}

inline Model build(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  for (const auto& [name, shape] : model_param_shapes(spec))
    m.params.add(name, init_param(name, shape, seed));
  return m;
}

// Decoder: d4 = conv3x3(concat(up2(conv5), conv4)), d3 likewise one level
// up, then logits = classifier(up8(d3)) at full input resolution.
template <typename T>
ValueRef decode(GraphT<T>& g, const PyramidRefs& pyr,
                ParamStoreT<T>& params) {
  ValueRef d4 = g.concat({g.upsample_bilinear(pyr.conv5, 2), pyr.conv4});
  d4 = g.relu(g.conv2d(d4, g.param(params.at("decoder.fuse4.weight")),
                       g.param(params.at("decoder.fuse4.bias")), 1, 1));
  ValueRef d3 = g.concat({g.upsample_bilinear(d4, 2), pyr.conv3});
  d3 = g.relu(g.conv2d(d3, g.param(params.at("decoder.fuse3.weight")),
                       g.param(params.at("decoder.fuse3.bias")), 1, 1));
  ValueRef full = g.upsample_bilinear(d3, 8);
  return g.conv1x1(full, g.param(params.at("decoder.classifier.weight")),
                   g.param(params.at("decoder.classifier.bias")));
}

// Records the whole forward pass for one batch of frame sequences.
// frames are ordered oldest first, current frame last.
template <typename T>
ValueRef model_forward(GraphT<T>& g, const ModelSpec& spec,
                       ParamStoreT<T>& params,
                       const std::vector<ValueRef>& frames) {
  if (static_cast<int64_t>(frames.size()) != spec.order)
    throw ContractError("forward: expected " + std::to_string(spec.order) +
                        " frames, got " + std::to_string(frames.size()));
  for (ValueRef f : frames) {
    const Shape4& s = g.value(f).shape;
    if (s.c != spec.encoder.in_channels || s.h != spec.input_height ||
        s.w != spec.input_width)
      throw ShapeError("forward: frame shape " + s.str() +
                       " does not match model input " +
                       std::to_string(spec.input_height) + "x" +
                       std::to_string(spec.input_width));
    if (s.n != g.value(frames[0]).shape.n)
      throw ShapeError("forward: inconsistent batch size across frames");
  }

  const auto prefixes = spec.encoder_prefixes();
  std::vector<PyramidRefs> pyramids;
  for (int64_t k = 0; k < spec.order; ++k) {
    const std::string& prefix =
        spec.tie_encoders ? prefixes[0] : prefixes[static_cast<size_t>(k)];
    pyramids.push_back(encode(g, frames[static_cast<size_t>(k)], params,
                              prefix, spec.encoder));
  }

  PyramidRefs fused{};
  if (spec.order == 1) {
    fused = pyramids[0];
  } else if (spec.kind == ModelKind::MSFCN) {
    fused = fuse_streams(g, pyramids, params, "fusion");
  } else {
    fused = recurrent_fuse(g, pyramids, params, "recurrent");
  }
  return decode(g, fused, params);
}

inline Tensor forward(const Model& m, const std::vector<Tensor>& frames) {
  Graph g;
  std::vector<ValueRef> refs;
  for (const auto& f : frames) refs.push_back(g.input(f));
  // params are not mutated; the const_cast only feeds the graph leaves
  ValueRef logits = model_forward(g, m.spec,
                                  const_cast<ParamStore&>(m.params), refs);
  return g.value(logits);
}

// Per-pixel argmax; ties go to the lowest class index.
inline LabelMask argmax_classes(const Tensor& logits) {
  const Shape4& s = logits.shape;
  LabelMask mask(s.n, s.h, s.w);
  const int64_t plane = s.h * s.w;
  for (int64_t n = 0; n < s.n; ++n) {
    const float* base = logits.data.data() + n * s.c * plane;
    for (int64_t p = 0; p < plane; ++p) {
      int32_t best = 0;
      float best_v = base[p];
      for (int64_t c = 1; c < s.c; ++c) {
        const float v = base[c * plane + p];
        if (v > best_v) {
          best_v = v;
          best = static_cast<int32_t>(c);
        }
      }
      mask.data[static_cast<size_t>(n * plane + p)] = best;
    }
  }
  return mask;
}

inline LabelMask predict_mask(const Model& m,
                              const std::vector<Tensor>& frames) {
  return argmax_classes(forward(m, frames));
}

}  // namespace msfcn

#endif
