#include "msfcn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <utility>

#include "msfcn/errors.hpp"
#include "msfcn/jsonio.hpp"
#include "msfcn/rng.hpp"

namespace msfcn {
namespace {

constexpr uint32_t kVersion = 1;

class ByteWriter {
 public:
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32s(const std::vector<float>& vals) {
    for (float f : vals) u32(std::bit_cast<uint32_t>(f));
  }
  void bytes(const std::string& s) { buf_ += s; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(buf_.data(), static_cast<long>(buf_.size()));
    if (!out) throw FormatError(path + ": write failed");
  }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    bytes_.assign(std::istreambuf_iterator<char>(in),
                  std::istreambuf_iterator<char>());
  }

  std::string context;  // e.g. "record 3", folded into error messages

  [[noreturn]] void fail(const std::string& what) const {
    std::string where = context.empty() ? "" : context + ": ";
    throw FormatError(path_ + ": " + where + what + " at byte " +
                      std::to_string(pos_));
  }

  std::string str(size_t n) {
    if (bytes_.size() - pos_ < n) fail("unexpected end of file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  uint32_t u32() {
    if (bytes_.size() - pos_ < 4) fail("unexpected end of file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    uint64_t lo = u32(), hi = u32();
    return lo | (hi << 32);
  }

  std::vector<float> f32s(size_t n) {
    std::vector<float> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(u32());
    return out;
  }

  uint64_t checksum_span(size_t start, size_t len) const {
    return fnv1a64(std::string_view(bytes_).substr(start, len));
  }

  size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }

 private:
  std::string bytes_;
  size_t pos_ = 0;
  std::string path_;
};

struct ParsedCheckpoint {
  uint32_t version = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<uint64_t> checksums;
  nlohmann::json spec_json;
  bool has_adam = false;
  uint64_t adam_t = 0;
  std::vector<std::vector<float>> adam_m, adam_v;
};

ParsedCheckpoint parse(const std::string& path) {
  ByteReader r(path);
  ParsedCheckpoint out;
  if (r.str(4) != "MSFC")
    throw FormatError(path + ": bad magic bytes, not a checkpoint");
  out.version = r.u32();
  if (out.version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(out.version) + " (expected " +
                      std::to_string(kVersion) + ")");
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    r.context = "record " + std::to_string(i);
    uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 4096) r.fail("implausible name length");
    std::string name = r.str(name_len);
    uint32_t rank = r.u32();
    if (rank != 4) r.fail("expected rank 4, got " + std::to_string(rank));
    int64_t d[4];
    for (auto& x : d) x = static_cast<int64_t>(r.u32());
    Shape4 shape(d[0], d[1], d[2], d[3]);
    try {
      shape.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
    size_t start = r.pos();
    Tensor t(shape);
    t.data = r.f32s(static_cast<size_t>(shape.elems()));
    out.checksums.push_back(r.checksum_span(start, r.pos() - start));
    out.tensors.emplace_back(std::move(name), std::move(t));
  }
  r.context.clear();
  if (r.str(4) != "SPEC")
    r.fail("expected SPEC section after parameter records");
  uint32_t spec_len = r.u32();
  std::string spec_str = r.str(spec_len);
  try {
    out.spec_json = nlohmann::json::parse(spec_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": malformed spec JSON: " + e.what());
  }
  if (!r.at_end()) {
    r.context = "optimizer section";
    if (r.str(4) != "ADAM") r.fail("unexpected trailing bytes");
    out.has_adam = true;
    out.adam_t = r.u64();
    uint32_t acount = r.u32();
    if (acount != count)
      r.fail("optimizer tracks " + std::to_string(acount) +
             " parameters, file has " + std::to_string(count));
    for (uint32_t i = 0; i < count; ++i) {
      size_t n = out.tensors[i].second.data.size();
      out.adam_m.push_back(r.f32s(n));
      out.adam_v.push_back(r.f32s(n));
    }
    if (!r.at_end()) r.fail("unexpected trailing bytes");
  }
  return out;
}

}  // namespace

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  return nlohmann::json{
      {"kind", kind_name(spec.kind)},
      {"order", spec.order},
      {"num_classes", spec.num_classes},
      {"tie_encoders", spec.tie_encoders},
      {"input_height", spec.input_height},
      {"input_width", spec.input_width},
      {"encoder",
       {{"in_channels", spec.encoder.in_channels},
        {"stage_channels", spec.encoder.stage_channels},
        {"blocks_per_stage", spec.encoder.blocks_per_stage}}},
  };
}

ModelSpec model_spec_from_json(const nlohmann::json& j,
                               const std::string& path) {
  JsonView v(j, path);
  ModelSpec spec;
  spec.kind = kind_from_name(v.require<std::string>("kind"));
  spec.order = v.get("order", spec.kind == ModelKind::FCN ? int64_t{1}
                              : spec.kind == ModelKind::MSFCN ? int64_t{2}
                                                              : int64_t{2});
  spec.num_classes = v.get("num_classes", spec.num_classes);
  spec.tie_encoders = v.get("tie_encoders", spec.tie_encoders);
  spec.input_height = v.get("input_height", spec.input_height);
  spec.input_width = v.get("input_width", spec.input_width);
  if (v.has("encoder")) {
    JsonView e = v.child("encoder");
    spec.encoder.in_channels = e.get("in_channels", spec.encoder.in_channels);
    spec.encoder.stage_channels =
        e.get("stage_channels", spec.encoder.stage_channels);
    spec.encoder.blocks_per_stage =
        e.get("blocks_per_stage", spec.encoder.blocks_per_stage);
    e.finish();
  }
  v.finish();
  spec.validate();
  return spec;
}

void save_checkpoint(const Model& model, const std::string& path,
                     const AdamState* adam) {
  ByteWriter w;
  w.bytes("MSFC");
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(model.params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    const Param& p = model.params[i];
    w.u32(static_cast<uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(4);
    w.u32(static_cast<uint32_t>(p.value.shape.n));
    w.u32(static_cast<uint32_t>(p.value.shape.c));
    w.u32(static_cast<uint32_t>(p.value.shape.h));
    w.u32(static_cast<uint32_t>(p.value.shape.w));
    w.f32s(p.value.data);
  }
  std::string spec_str = model_spec_to_json(model.spec).dump();
  w.bytes("SPEC");
  w.u32(static_cast<uint32_t>(spec_str.size()));
  w.bytes(spec_str);
  if (adam) {
    if (adam->m.size() != model.params.size())
      throw ContractError("checkpoint: optimizer state does not match model");
    w.bytes("ADAM");
    w.u64(adam->t);
    w.u32(static_cast<uint32_t>(model.params.size()));
    for (size_t i = 0; i < model.params.size(); ++i) {
      w.f32s(adam->m[i]);
      w.f32s(adam->v[i]);
    }
  }
  w.save(path);
}

Model load_checkpoint(const std::string& path, AdamState* adam) {
  ParsedCheckpoint pc = parse(path);
  ModelSpec spec = model_spec_from_json(pc.spec_json, path + "#spec");
  Model model = build(spec, 0);
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < pc.tensors.size(); ++i)
    index[pc.tensors[i].first] = i;
  for (size_t i = 0; i < model.params.size(); ++i) {
    Param& p = model.params[i];
    auto it = index.find(p.name);
    if (it == index.end())
      throw FormatError(path + ": missing parameter " + p.name);
    const Tensor& t = pc.tensors[it->second].second;
    if (!(t.shape == p.value.shape))
      throw FormatError(path + ": parameter " + p.name + " has shape " +
                        t.shape.str() + ", model expects " +
                        p.value.shape.str());
  }
  if (pc.tensors.size() != model.params.size())
    throw FormatError(path + ": file carries " +
                      std::to_string(pc.tensors.size()) +
                      " parameters, model has " +
                      std::to_string(model.params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    Param& p = model.params[i];
    p.value = pc.tensors[index[p.name]].second;
  }
  if (adam) {
    if (!pc.has_adam)
      throw FormatError(path + ": checkpoint carries no optimizer section");
    adam->t = pc.adam_t;
    adam->m.clear();
    adam->v.clear();
    for (size_t i = 0; i < model.params.size(); ++i) {
      size_t src = index[model.params[i].name];
      adam->m.push_back(pc.adam_m[src]);
      adam->v.push_back(pc.adam_v[src]);
    }
  }
  return model;
}

void load_params(ParamStore& params, const std::string& path) {
  ParsedCheckpoint pc = parse(path);
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < pc.tensors.size(); ++i)
    index[pc.tensors[i].first] = i;
  std::vector<size_t> src(params.size());
  std::vector<bool> used(pc.tensors.size(), false);
  for (size_t i = 0; i < params.size(); ++i) {
    auto it = index.find(params[i].name);
    if (it == index.end())
      throw FormatError(path + ": missing parameter " + params[i].name);
    if (!(pc.tensors[it->second].second.shape == params[i].value.shape))
      throw FormatError(path + ": parameter " + params[i].name +
                        " has shape " +
                        pc.tensors[it->second].second.shape.str() +
                        ", model expects " + params[i].value.shape.str());
    src[i] = it->second;
    used[it->second] = true;
  }
  for (size_t i = 0; i < pc.tensors.size(); ++i)
    if (!used[i])
      throw FormatError(path + ": unknown parameter name " +
                        pc.tensors[i].first);
  for (size_t i = 0; i < params.size(); ++i)
    params[i].value = pc.tensors[src[i]].second;
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
  ParsedCheckpoint pc = parse(path);
  CheckpointInfo info;
  info.version = pc.version;
  info.spec = pc.spec_json;
  info.has_adam = pc.has_adam;
  info.adam_t = pc.adam_t;
  for (size_t i = 0; i < pc.tensors.size(); ++i) {
    info.records.push_back({pc.tensors[i].first, pc.tensors[i].second.shape,
                            pc.checksums[i]});
    info.total_params += pc.tensors[i].second.shape.elems();
  }
  return info;
}

}  // namespace msfcn
