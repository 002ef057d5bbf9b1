#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "futurelm/tape.hpp"

namespace flm {

struct AdamMoments {
  Tensor first;
  Tensor second;
};

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  // Keyed by parameter name; created lazily on the first step.
  std::unordered_map<std::string, AdamMoments> moments;

  void validate() const;
};

// One bias-corrected Adam update of every parameter in `params` from its
// accumulated gradient. Throws ContractError naming the parameter if a
// gradient is not finite; in that case no parameter is modified.
void adam_step(ParameterSet& params, AdamState& state);
// One step over several parameter sets sharing the step counter. Parameter
// names must be unique across the sets.
void adam_step(const std::vector<ParameterSet*>& sets, AdamState& state);
// Same, with the learning rate of sets[i] multiplied by lr_scale[i].
void adam_step(const std::vector<ParameterSet*>& sets, AdamState& state, std::span<const double> lr_scale);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients against the five-point central difference
// (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h for every scalar in `params`. `build_loss` records a scalar loss on the given tape
// and must be deterministic; two forward passes that disagree raise
// ContractError. Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor);
// the floor keeps gradients that are exactly zero (for example attention key
// biases, which softmax cancels) from turning rounding in the loss into a
// large ratio.
inline constexpr double kGradCheckFloor = 1e-6;
GradCheckResult grad_check(const std::function<Var(Tape&)>& build_loss,
                           const std::vector<Parameter*>& params, double eps = 1e-3);

std::vector<Parameter*> all_parameters(ParameterSet& set);

}  // namespace flm
