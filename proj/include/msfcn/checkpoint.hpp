#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfcn/adam.hpp"
#include "msfcn/model.hpp"

namespace msfcn {

// Checkpoint wire format, little-endian throughout:
//   "MSFC", u32 version,
//   u32 count, then per parameter: u32 name_len, name bytes, u32 rank (=4),
//   four u32 dims, f32 payload;
//   "SPEC", u32 json_len, model-spec JSON (lets eval/predict rebuild the
//   model without a config file);
//   optional "ADAM", u64 step counter, u32 count, per parameter f32 m then
//   f32 v payloads (shapes implied by the records above).
nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j,
                               const std::string& path);

void save_checkpoint(const Model& model, const std::string& path,
                     const AdamState* adam = nullptr);

// Rebuilds the model from the embedded spec. Any malformation throws
// FormatError; nothing is partially loaded.
Model load_checkpoint(const std::string& path, AdamState* adam = nullptr);

// Loads records into an existing store: every store parameter must appear in
// the file with a matching shape, and the file may not carry unknown names.
void load_params(ParamStore& params, const std::string& path);

struct CheckpointRecord {
  std::string name;
  Shape4 shape{1, 1, 1, 1};
  uint64_t checksum = 0;  // fnv-1a over payload bytes
};

struct CheckpointInfo {
  uint32_t version = 0;
  std::vector<CheckpointRecord> records;
  int64_t total_params = 0;
  nlohmann::json spec;
  bool has_adam = false;
  uint64_t adam_t = 0;
};

CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace msfcn
