#pragma once

#include <cstdint>
#include <vector>

#include "msfcn/params.hpp"

namespace msfcn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments run parallel to the store's parameter order. Stored as
// f32 (the checkpoint payload width); per-step arithmetic is done in double.
struct AdamState {
  uint64_t t = 0;
  std::vector<std::vector<float>> m, v;
};

AdamState make_adam_state(const ParamStore& params);

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

}  // namespace msfcn
