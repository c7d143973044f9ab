#include "msfcn/config.hpp"

#include "msfcn/checkpoint.hpp"
#include "msfcn/errors.hpp"
#include "msfcn/jsonio.hpp"

namespace msfcn {

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json data = scene_config_to_json(cfg.data.scene);
  data["root"] = cfg.data.root;
  data["num_sequences"] = cfg.data.num_sequences;
  data["seed"] = cfg.data.seed;
  return nlohmann::json{
      {"model", model_spec_to_json(cfg.model)},
      {"train", train_config_to_json(cfg.train)},
      {"data", data},
      {"output_dir", cfg.output_dir},
  };
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::string& path) {
  JsonView v(j, path);
  ExperimentConfig cfg;
  if (v.has("model"))
    cfg.model = model_spec_from_json(v.raw("model"), path + ".model");
  if (v.has("train"))
    cfg.train = train_config_from_json(v.raw("train"), path + ".train");
  if (v.has("data")) {
    nlohmann::json data = v.raw("data");
    if (!data.is_object())
      throw FormatError(path + ".data: expected a JSON object");
    JsonView d(data, path + ".data");
    cfg.data.root = d.get("root", cfg.data.root);
    cfg.data.num_sequences = d.get("num_sequences", cfg.data.num_sequences);
    cfg.data.seed = d.get("seed", cfg.data.seed);
    // the remaining keys are the scene itself
    data.erase("root");
    data.erase("num_sequences");
    data.erase("seed");
    cfg.data.scene = scene_config_from_json(data, path + ".data");
  }
  cfg.output_dir = v.get("output_dir", cfg.output_dir);
  v.finish();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(load_json_file(path), path);
}

}  // namespace msfcn
