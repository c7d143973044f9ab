#include "msfcn/adam.hpp"

#include <cmath>
#include <string>

#include "msfcn/errors.hpp"

namespace msfcn {

AdamState make_adam_state(const ParamStore& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    size_t n = params[i].value.data.size();
    s.m.emplace_back(n, 0.0f);
    s.v.emplace_back(n, 0.0f);
  }
  return s;
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  if (cfg.lr <= 0) throw ValueError("adam: learning rate must be positive");
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractError("adam: state tracks " + std::to_string(state.m.size()) +
                        " parameters, store has " +
                        std::to_string(params.size()));
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    if (!p.trainable) continue;
    std::vector<float>& m = state.m[i];
    std::vector<float>& v = state.v[i];
    if (m.size() != p.value.data.size() || v.size() != p.value.data.size())
      throw ContractError("adam: moment shape mismatch for " + p.name);
    for (size_t j = 0; j < p.value.data.size(); ++j) {
      double g = p.grad.data[j];
      double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      double mhat = static_cast<double>(m[j]) / bc1;
      double vhat = static_cast<double>(v[j]) / bc2;
      p.value.data[j] = static_cast<float>(
          p.value.data[j] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace msfcn
