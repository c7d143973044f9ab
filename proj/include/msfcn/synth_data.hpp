#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfcn/tensor.hpp"

namespace msfcn {

// Moving textured shapes over a scrolling background. Class ids: 0 background,
// 1 circle, 2 square, 3 triangle; num_classes caps which shapes are in play.
// In camouflage mode object fill is a stationary textured field drawn from
// the same distribution as the background, so a single frame carries no
// figure/ground cue and motion is the only signal separating the two.
struct SceneConfig {
  int64_t height = 64;
  int64_t width = 96;
  int64_t num_classes = 4;
  int64_t min_objects = 1;
  int64_t max_objects = 3;
  double speed_min = 1.0;   // object speed, px/frame
  double speed_max = 2.5;
  double scroll_y = 0.4;    // background scroll (ego-motion), px/frame
  double scroll_x = 0.9;
  bool camouflage = false;
  double noise_stddev = 0.02;
  int64_t sequence_length = 8;
  double size_min = 7.0;    // shape half-extent, px
  double size_max = 13.0;

  void validate() const;
  bool operator==(const SceneConfig&) const = default;
};

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j,
                                   const std::string& path);

struct FramePair {
  Tensor frame;    // (1,3,h,w), values quantized to k/255
  LabelMask mask;  // (1,h,w)
};
using SceneSequence = std::vector<FramePair>;

struct ObjectMeta {
  int64_t cls = 0;
  double size = 0, y0 = 0, x0 = 0, vy = 0, vx = 0;
};
struct SequenceMeta {
  std::vector<ObjectMeta> objects;
};

SceneSequence generate_sequence(const SceneConfig& cfg, uint64_t seed,
                                SequenceMeta* meta = nullptr);

// One training/eval sample: K ordered frames (oldest first) plus the mask of
// the last frame.
struct VideoSample {
  std::vector<Tensor> frames;
  LabelMask mask;
};

struct SplitIds {
  std::vector<int64_t> train, val, test;
};
// 70/15/15 by sequence, contiguous ids, each split non-empty for n >= 3.
SplitIds split_sequences(int64_t n_sequences);

std::vector<VideoSample> windows_of(const SceneSequence& seq, int64_t k);

struct DatasetSplits {
  std::vector<VideoSample> train, val, test;
  SplitIds ids;
};
DatasetSplits make_dataset(const SceneConfig& cfg, uint64_t seed,
                           int64_t n_sequences, int64_t k);

Tensor resize_bilinear(const Tensor& image, int64_t th, int64_t tw);
LabelMask resize_nearest(const LabelMask& mask, int64_t th, int64_t tw);

// Disk layout: <root>/<split>/seq_<%05d>/frame_%05d.ppm + mask_%05d.pgm,
// manifest.json at the root.
void write_dataset(const std::string& root, const SceneConfig& cfg,
                   uint64_t seed, int64_t n_sequences);
nlohmann::json read_manifest(const std::string& root);
std::vector<VideoSample> load_split(const std::string& root,
                                    const std::string& split, int64_t k);

}  // namespace msfcn
