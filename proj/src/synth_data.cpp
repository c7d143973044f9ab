#include "msfcn/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "msfcn/errors.hpp"
#include "msfcn/image_io.hpp"
#include "msfcn/jsonio.hpp"
#include "msfcn/kernels.hpp"
#include "msfcn/parallel.hpp"
#include "msfcn/rng.hpp"

namespace msfcn {
namespace {

// Band-limited stationary random field: per channel, a sum of plane waves
// with random directions, wavelengths and phases. Its statistics are the
// same at every fractional position -- a bilinear lattice interpolant is
// not (contrast dips at cell centers), and that periodic contrast grid
// betrays the sub-pixel anchor of whatever the field is painted on. Smooth
// enough that frame differencing sees coherent motion energy, not speckle.
class SpectralNoise {
 public:
  SpectralNoise() = default;
  SpectralNoise(int channels, Rng& rng)
      : waves_(static_cast<size_t>(channels) * kWaves) {
    for (auto& w : waves_) {
      const double omega =
          2.0 * std::numbers::pi / rng.uniform(kWavelengthMin, kWavelengthMax);
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.wy = omega * std::sin(ang);
      w.wx = omega * std::cos(ang);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }

  float sample(int c, double y, double x) const {
    double v = 0.5;
    const Wave* w = waves_.data() + static_cast<size_t>(c) * kWaves;
    for (int k = 0; k < kWaves; ++k)
      v += kAmp * std::cos(w[k].wy * y + w[k].wx * x + w[k].phase);
    return static_cast<float>(v);
  }

 private:
  struct Wave {
    double wy = 0, wx = 0, phase = 0;
  };
  static constexpr int kWaves = 12;               // per channel
  static constexpr double kWavelengthMin = 6.0;   // px
  static constexpr double kWavelengthMax = 14.0;  // px
  static constexpr double kAmp = 0.094;           // sum stddev ~0.23
  std::vector<Wave> waves_;
};

struct SceneObject {
  int64_t cls = 1;   // 1 circle, 2 square, 3 triangle
  double size = 0;   // half-extent
  double y0 = 0, x0 = 0, vy = 0, vx = 0;
  SpectralNoise texture;  // camouflage fill, anchored to the object frame
};

// Pixel-center point-in-shape tests; size is the half-extent in every case.
bool inside_shape(int64_t cls, double size, double dy, double dx) {
  switch (cls) {
    case 1:
      return dy * dy + dx * dx <= size * size;
    case 2:
      return std::abs(dy) <= size && std::abs(dx) <= size;
    case 3:
      // apex up: half-width grows linearly from 0 at the top to size at
      // the base
      return dy >= -size && dy <= size && std::abs(dx) <= (dy + size) / 2.0;
    default:
      return false;
  }
}

// solid fills for the plain (non-camouflage) mode
constexpr float kClassFill[4][3] = {
    {0.0f, 0.0f, 0.0f},
    {0.85f, 0.25f, 0.25f},
    {0.25f, 0.85f, 0.25f},
    {0.25f, 0.35f, 0.90f},
};

float quantize_unit(float v) {
  if (!(v >= 0.0f)) v = 0.0f;
  if (v > 1.0f) v = 1.0f;
  long k = std::lround(static_cast<double>(v) * 255.0);
  return static_cast<float>(k) * (1.0f / 255.0f);
}

std::string seq_dir_name(int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%05lld", static_cast<long long>(id));
  return buf;
}

std::string frame_name(const char* stem, const char* ext, int64_t t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%05lld.%s", stem,
                static_cast<long long>(t), ext);
  return buf;
}

}  // namespace

void SceneConfig::validate() const {
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0)
    throw ValueError("scene: height and width must be positive multiples of "
                     "32, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (num_classes < 2 || num_classes > 4)
    throw ValueError("scene: num_classes must be in [2,4] (background plus up "
                     "to 3 shapes)");
  if (min_objects < 1 || max_objects < min_objects)
    throw ValueError("scene: need 1 <= min_objects <= max_objects");
  if (speed_min < 0 || speed_max < speed_min)
    throw ValueError("scene: need 0 <= speed_min <= speed_max");
  if (size_min < 2 || size_max < size_min)
    throw ValueError("scene: need 2 <= size_min <= size_max");
  if (noise_stddev < 0) throw ValueError("scene: noise_stddev must be >= 0");
  if (sequence_length < 1)
    throw ValueError("scene: sequence_length must be >= 1");
  double span = 2.0 * size_max + 2.0;
  if (span >= static_cast<double>(std::min(height, width)))
    throw ValueError("scene: size_max " + std::to_string(size_max) +
                     " does not fit a " + std::to_string(height) + "x" +
                     std::to_string(width) + " frame");
}

nlohmann::json scene_config_to_json(const SceneConfig& cfg) {
  return nlohmann::json{
      {"height", cfg.height},
      {"width", cfg.width},
      {"num_classes", cfg.num_classes},
      {"min_objects", cfg.min_objects},
      {"max_objects", cfg.max_objects},
      {"speed_min", cfg.speed_min},
      {"speed_max", cfg.speed_max},
      {"scroll_y", cfg.scroll_y},
      {"scroll_x", cfg.scroll_x},
      {"camouflage", cfg.camouflage},
      {"noise_stddev", cfg.noise_stddev},
      {"sequence_length", cfg.sequence_length},
      {"size_min", cfg.size_min},
      {"size_max", cfg.size_max},
  };
}

SceneConfig scene_config_from_json(const nlohmann::json& j,
                                   const std::string& path) {
  JsonView v(j, path);
  SceneConfig cfg;
  cfg.height = v.get("height", cfg.height);
  cfg.width = v.get("width", cfg.width);
  cfg.num_classes = v.get("num_classes", cfg.num_classes);
  cfg.min_objects = v.get("min_objects", cfg.min_objects);
  cfg.max_objects = v.get("max_objects", cfg.max_objects);
  cfg.speed_min = v.get("speed_min", cfg.speed_min);
  cfg.speed_max = v.get("speed_max", cfg.speed_max);
  cfg.scroll_y = v.get("scroll_y", cfg.scroll_y);
  cfg.scroll_x = v.get("scroll_x", cfg.scroll_x);
  cfg.camouflage = v.get("camouflage", cfg.camouflage);
  cfg.noise_stddev = v.get("noise_stddev", cfg.noise_stddev);
  cfg.sequence_length = v.get("sequence_length", cfg.sequence_length);
  cfg.size_min = v.get("size_min", cfg.size_min);
  cfg.size_max = v.get("size_max", cfg.size_max);
  v.finish();
  cfg.validate();
  return cfg;
}

SceneSequence generate_sequence(const SceneConfig& cfg, uint64_t seed,
                                SequenceMeta* meta) {
  cfg.validate();
  const int64_t h = cfg.height, w = cfg.width, steps = cfg.sequence_length;
  Rng rng(seed);

  // The field is defined on the whole plane, so scrolling never runs off it.
  SpectralNoise background(3, rng);

  int64_t n_obj = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  std::vector<SceneObject> objects;
  objects.reserve(static_cast<size_t>(n_obj));
  for (int64_t i = 0; i < n_obj; ++i) {
    SceneObject obj;
    obj.cls = rng.uniform_int(1, cfg.num_classes - 1);
    obj.size = rng.uniform(cfg.size_min, cfg.size_max);
    if (cfg.camouflage) obj.texture = SpectralNoise(3, rng);
    // keep the whole shape in frame for every step (stronger than the 50%
    // visibility contract, and it is what the area oracles assume)
    const double margin = obj.size + 1.0;
    const double ylo = margin, yhi = h - 1 - margin;
    const double xlo = margin, xhi = w - 1 - margin;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      double y0 = rng.uniform(ylo, yhi);
      double x0 = rng.uniform(xlo, xhi);
      double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
      double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double vy = speed * std::sin(ang), vx = speed * std::cos(ang);
      double y1 = y0 + vy * (steps - 1), x1 = x0 + vx * (steps - 1);
      if (y1 >= ylo && y1 <= yhi && x1 >= xlo && x1 <= xhi) {
        obj.y0 = y0;
        obj.x0 = x0;
        obj.vy = vy;
        obj.vx = vx;
        placed = true;
      }
    }
    if (!placed)
      throw ValueError("scene: cannot place an object of size " +
                       std::to_string(obj.size) + " moving up to " +
                       std::to_string(cfg.speed_max) +
                       " px/frame inside the frame; shrink sizes or speeds");
    objects.push_back(std::move(obj));
  }

  if (meta) {
    meta->objects.clear();
    for (const auto& o : objects)
      meta->objects.push_back({o.cls, o.size, o.y0, o.x0, o.vy, o.vx});
  }

  SceneSequence seq;
  seq.reserve(static_cast<size_t>(steps));
  for (int64_t t = 0; t < steps; ++t) {
    Tensor frame(Shape4(1, 3, h, w));
    LabelMask mask(1, h, w);
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const SceneObject* top = nullptr;
        double tdy = 0, tdx = 0;
        for (const auto& o : objects) {  // later objects draw on top
          double dy = y - (o.y0 + o.vy * t);
          double dx = x - (o.x0 + o.vx * t);
          if (inside_shape(o.cls, o.size, dy, dx)) {
            top = &o;
            tdy = dy;
            tdx = dx;
          }
        }
        if (top) {
          mask.at(0, y, x) = static_cast<int32_t>(top->cls);
          for (int c = 0; c < 3; ++c)
            frame.at(0, c, y, x) =
                cfg.camouflage
                    ? top->texture.sample(c, tdy + top->size + 1.0,
                                          tdx + top->size + 1.0)
                    : kClassFill[top->cls][c];
        } else {
          mask.at(0, y, x) = 0;
          for (int c = 0; c < 3; ++c)
            frame.at(0, c, y, x) = background.sample(
                c, y + cfg.scroll_y * t, x + cfg.scroll_x * t);
        }
      }
    }
    if (cfg.noise_stddev > 0) {
      for (auto& v : frame.data)
        v += static_cast<float>(cfg.noise_stddev * rng.normal());
    }
    for (auto& v : frame.data) v = quantize_unit(v);
    seq.push_back({std::move(frame), std::move(mask)});
  }
  return seq;
}

SplitIds split_sequences(int64_t n) {
  if (n < 3)
    throw ValueError("dataset: need at least 3 sequences to fill all splits, "
                     "got " + std::to_string(n));
  int64_t n_val = std::max<int64_t>(1, n * 15 / 100);
  int64_t n_test = n_val;
  int64_t n_train = n - n_val - n_test;
  SplitIds ids;
  for (int64_t i = 0; i < n_train; ++i) ids.train.push_back(i);
  for (int64_t i = n_train; i < n_train + n_val; ++i) ids.val.push_back(i);
  for (int64_t i = n_train + n_val; i < n; ++i) ids.test.push_back(i);
  return ids;
}

std::vector<VideoSample> windows_of(const SceneSequence& seq, int64_t k) {
  if (k < 1) throw ValueError("dataset: window length must be >= 1");
  int64_t len = static_cast<int64_t>(seq.size());
  if (len < k)
    throw ValueError("dataset: sequence of length " + std::to_string(len) +
                     " is shorter than window " + std::to_string(k));
  std::vector<VideoSample> out;
  out.reserve(static_cast<size_t>(len - k + 1));
  for (int64_t t = k - 1; t < len; ++t) {
    VideoSample s;
    for (int64_t i = t - k + 1; i <= t; ++i)
      s.frames.push_back(seq[static_cast<size_t>(i)].frame);
    s.mask = seq[static_cast<size_t>(t)].mask;
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplits make_dataset(const SceneConfig& cfg, uint64_t seed,
                           int64_t n_sequences, int64_t k) {
  cfg.validate();
  if (cfg.sequence_length < k)
    throw ValueError("dataset: sequence_length " +
                     std::to_string(cfg.sequence_length) +
                     " is shorter than window " + std::to_string(k));
  DatasetSplits ds;
  ds.ids = split_sequences(n_sequences);
  std::vector<SceneSequence> seqs(static_cast<size_t>(n_sequences));
  parallel_for(n_sequences, [&](int64_t i) {
    seqs[static_cast<size_t>(i)] =
        generate_sequence(cfg, mix_seed(seed, static_cast<uint64_t>(i)));
  });
  auto collect = [&](const std::vector<int64_t>& ids,
                     std::vector<VideoSample>* out) {
    for (int64_t id : ids)
      for (auto& s : windows_of(seqs[static_cast<size_t>(id)], k))
        out->push_back(std::move(s));
  };
  collect(ds.ids.train, &ds.train);
  collect(ds.ids.val, &ds.val);
  collect(ds.ids.test, &ds.test);
  return ds;
}

Tensor resize_bilinear(const Tensor& image, int64_t th, int64_t tw) {
  if (th < 1 || tw < 1)
    throw ValueError("resize: target dims must be positive");
  return resize_bilinear_t<float>(image, th, tw);
}

LabelMask resize_nearest(const LabelMask& mask, int64_t th, int64_t tw) {
  if (th < 1 || tw < 1)
    throw ValueError("resize: target dims must be positive");
  LabelMask out(mask.n, th, tw);
  double sy = static_cast<double>(mask.h) / static_cast<double>(th);
  double sx = static_cast<double>(mask.w) / static_cast<double>(tw);
  for (int64_t n = 0; n < mask.n; ++n)
    for (int64_t y = 0; y < th; ++y) {
      int64_t src_y = std::clamp<int64_t>(
          static_cast<int64_t>(std::floor((y + 0.5) * sy)), 0, mask.h - 1);
      for (int64_t x = 0; x < tw; ++x) {
        int64_t src_x = std::clamp<int64_t>(
            static_cast<int64_t>(std::floor((x + 0.5) * sx)), 0, mask.w - 1);
        out.at(n, y, x) = mask.at(n, src_y, src_x);
      }
    }
  return out;
}

void write_dataset(const std::string& root, const SceneConfig& cfg,
                   uint64_t seed, int64_t n_sequences) {
  cfg.validate();
  SplitIds ids = split_sequences(n_sequences);
  std::vector<std::string> split_of(static_cast<size_t>(n_sequences));
  for (int64_t i : ids.train) split_of[static_cast<size_t>(i)] = "train";
  for (int64_t i : ids.val) split_of[static_cast<size_t>(i)] = "val";
  for (int64_t i : ids.test) split_of[static_cast<size_t>(i)] = "test";

  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* s : {"train", "val", "test"}) {
    fs::create_directories(fs::path(root) / s, ec);
    if (ec)
      throw DataError(root + ": cannot create dataset directories: " +
                      ec.message());
  }

  std::vector<SequenceMeta> metas(static_cast<size_t>(n_sequences));
  parallel_for(n_sequences, [&](int64_t i) {
    auto seq = generate_sequence(cfg, mix_seed(seed, static_cast<uint64_t>(i)),
                                 &metas[static_cast<size_t>(i)]);
    fs::path dir = fs::path(root) / split_of[static_cast<size_t>(i)] /
                   seq_dir_name(i);
    fs::create_directories(dir);
    for (int64_t t = 0; t < static_cast<int64_t>(seq.size()); ++t) {
      write_image((dir / frame_name("frame", "ppm", t)).string(),
                  seq[static_cast<size_t>(t)].frame);
      write_mask((dir / frame_name("mask", "pgm", t)).string(),
                 seq[static_cast<size_t>(t)].mask);
    }
  });

  nlohmann::json seq_entries = nlohmann::json::array();
  for (int64_t i = 0; i < n_sequences; ++i) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : metas[static_cast<size_t>(i)].objects)
      objs.push_back({{"class", o.cls},
                      {"size", o.size},
                      {"y0", o.y0},
                      {"x0", o.x0},
                      {"vy", o.vy},
                      {"vx", o.vx}});
    seq_entries.push_back({{"id", i},
                           {"dir", seq_dir_name(i)},
                           {"split", split_of[static_cast<size_t>(i)]},
                           {"length", cfg.sequence_length},
                           {"objects", objs}});
  }
  nlohmann::json manifest{
      {"config", scene_config_to_json(cfg)},
      {"seed", seed},
      {"n_sequences", n_sequences},
      {"splits",
       {{"train", ids.train}, {"val", ids.val}, {"test", ids.test}}},
      {"sequences", seq_entries},
  };
  save_json_file((fs::path(root) / "manifest.json").string(), manifest);
}

nlohmann::json read_manifest(const std::string& root) {
  return load_json_file(
      (std::filesystem::path(root) / "manifest.json").string());
}

std::vector<VideoSample> load_split(const std::string& root,
                                    const std::string& split, int64_t k) {
  if (split != "train" && split != "val" && split != "test")
    throw ValueError("dataset: unknown split '" + split + "'");
  nlohmann::json manifest = read_manifest(root);
  namespace fs = std::filesystem;
  std::vector<VideoSample> out;
  try {
    for (const auto& entry : manifest.at("sequences")) {
      if (entry.at("split").get<std::string>() != split) continue;
      int64_t len = entry.at("length").get<int64_t>();
      fs::path dir =
          fs::path(root) / split / entry.at("dir").get<std::string>();
      SceneSequence seq;
      for (int64_t t = 0; t < len; ++t) {
        FramePair fp;
        fp.frame = read_image((dir / frame_name("frame", "ppm", t)).string());
        fp.mask = read_mask((dir / frame_name("mask", "pgm", t)).string());
        seq.push_back(std::move(fp));
      }
      for (auto& s : windows_of(seq, k)) out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(root + "/manifest.json: " + e.what());
  }
  return out;
}

}  // namespace msfcn
