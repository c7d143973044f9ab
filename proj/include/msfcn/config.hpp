#pragma once

#include <string>

#include "json.hpp"
#include "msfcn/model.hpp"
#include "msfcn/synth_data.hpp"
#include "msfcn/train.hpp"

namespace msfcn {

// The data section carries the scene fields inline next to the dataset
// root, e.g. {"root": "data/camo", "num_sequences": 36, "seed": 7,
// "height": 64, ...}.
struct DataConfig {
  SceneConfig scene;
  std::string root;
  int64_t num_sequences = 36;
  uint64_t seed = 0;
};

struct ExperimentConfig {
  ModelSpec model;
  TrainConfig train;
  DataConfig data;
  std::string output_dir = "runs/out";
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::string& path);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace msfcn
