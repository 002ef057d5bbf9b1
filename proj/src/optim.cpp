#include "futurelm/optim.hpp"

#include <algorithm>
#include <cmath>

#include "futurelm/errors.hpp"

namespace flm {

void AdamState::validate() const {
  if (!(lr > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw ConfigError("Adam hyperparameters must be positive with betas in (0,1)");
  }
}

void adam_step(ParameterSet& params, AdamState& state) { adam_step(std::vector{&params}, state); }

void adam_step(const std::vector<ParameterSet*>& sets, AdamState& state) {
  adam_step(sets, state, std::vector<double>(sets.size(), 1.0));
}

void adam_step(const std::vector<ParameterSet*>& sets, AdamState& state, std::span<const double> lr_scale) {
  state.validate();
  if (lr_scale.size() != sets.size()) throw ContractError("adam_step: one learning-rate scale per parameter set");
  for (const auto* set : sets) {
    for (const auto& p : *set) {
      if (!p.grad.all_finite()) {
        throw ContractError("non-finite gradient for parameter '" + p.name + "' at step " +
                            std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const double lr = state.lr * lr_scale[s];
    for (auto& p : *sets[s]) {
      auto [it, inserted] = state.moments.try_emplace(p.name);
      auto& mom = it->second;
      if (inserted) {
        mom.first = Tensor(p.value.rows(), p.value.cols());
        mom.second = Tensor(p.value.rows(), p.value.cols());
      } else if (!mom.first.same_shape(p.value)) {
        throw DimensionError("Adam moments for '" + p.name + "' have shape " +
                             mom.first.shape_string() + " but parameter is " + p.value.shape_string());
      }
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        mom.first[i] = state.beta1 * mom.first[i] + (1.0 - state.beta1) * g;
        mom.second[i] = state.beta2 * mom.second[i] + (1.0 - state.beta2) * g * g;
        const double mhat = mom.first[i] / c1;
        const double vhat = mom.second[i] / c2;
        p.value[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
      }
    }
  }
}

std::vector<Parameter*> all_parameters(ParameterSet& set) {
  std::vector<Parameter*> out;
  for (auto& p : set) out.push_back(&p);
  return out;
}

namespace {

double evaluate(const std::function<Var(Tape&)>& build_loss) {
  Tape tape(false);
  return build_loss(tape).value().item();
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& build_loss,
                           const std::vector<Parameter*>& params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("grad_check step must be positive");
  for (auto* p : params) p->zero_grad();
  double base = 0.0;
  {
    Tape tape(true);
    Var loss = build_loss(tape);
    base = loss.value().item();
    tape.backward(loss);
  }
  if (evaluate(build_loss) != base) {
    throw ContractError("grad_check: loss closure is not deterministic (two forward passes differ)");
  }

  GradCheckResult result;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        return evaluate(build_loss);
      };
      const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      p->value[i] = saved;
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        if (rel >= result.max_rel_error) {
          result.worst_parameter = p->name;
          result.worst_index = i;
          result.worst_analytic = analytic;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace flm
