#include "mokd/weight_controller.hpp"

#include <cmath>

namespace mokd {

void ControllerConfig::validate() const {
  if (!(eta_pi > 0.0)) throw ConfigError("controller: eta_pi must be positive");
  if (!(gamma > 0.0)) throw ConfigError("controller: gamma must be positive");
  if (mode == ControllerMode::fixed_weights &&
      (!(fixed_alpha.alpha1 > 0.0) || !(fixed_alpha.alpha2 > 0.0))) {
    throw ConfigError("controller: fixed_alpha entries must be positive");
  }
}

LossVector::LossVector(std::vector<double> values) : v_(std::move(values)) {
  if (v_.empty()) throw DimensionError("LossVector: need k >= 1");
  for (double x : v_) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw DomainError("LossVector: entries must be finite and strictly positive");
    }
  }
}

Vector log_gradient(const Vector& g, double loss) {
  if (!(loss > 0.0)) throw DomainError("log_gradient: loss must be positive");
  return scaled(g, 1.0 / loss);
}

ImprovementRates rates(const LossVector& before, const LossVector& after) {
  if (before.size() != after.size()) throw DimensionError("rates: length mismatch");
  ImprovementRates r;
  r.values.reserve(before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    r.values.push_back((before[i] - after[i]) / before[i]);
  }
  return r;
}

ExactStep step_exact(ControllerState& state, const TaskJacobian& grads, const LossVector& losses) {
  const std::size_t k = grads.task_count();
  if (losses.size() != k) throw DimensionError("step_exact: gradient/loss count mismatch");
  std::vector<Vector> log_rows;
  log_rows.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    log_rows.push_back(log_gradient(grads.row(i), losses[i]));
  }
  TaskJacobian log_j(std::move(log_rows));
  SimplexWeights pi = (k == 2)
                          ? solve_closed_form(gram2(log_j.row(0), log_j.row(1)))
                          : solve_simplex_qp(log_j, 1e-10);
  Vector update = combine(log_j, pi);
  state.pi = pi;
  state.step_count += 1;
  state.last_losses = losses;
  return ExactStep{std::move(pi), std::move(update)};
}

SimplexWeights step_amortized(ControllerState& state, const Vector& u, const ControllerConfig& cfg) {
  const std::size_t k = state.pi.size();
  if (u.size() != k) throw DimensionError("step_amortized: signal length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += state.pi[i] * u[i];
  Vector raw = Vector::zeros(k);
  for (std::size_t i = 0; i < k; ++i) raw[i] = state.pi[i] - cfg.eta_pi * s * u[i];
  Vector renorm = softmax(raw);
  state.pi = SimplexWeights(renorm.values());
  state.step_count += 1;
  return state.pi;
}

Vector step_fixed(ControllerState& state, const TaskJacobian& grads, const ControllerConfig& cfg) {
  if (grads.task_count() != 2) throw DimensionError("step_fixed: needs exactly two tasks");
  Vector out = combine_fixed(grads.row(0), grads.row(1), cfg.fixed_alpha);
  const double total = cfg.fixed_alpha.alpha1 + cfg.fixed_alpha.alpha2;
  state.pi = SimplexWeights({cfg.fixed_alpha.alpha1 / total, cfg.fixed_alpha.alpha2 / total});
  state.step_count += 1;
  return out;
}

}  // namespace mokd
