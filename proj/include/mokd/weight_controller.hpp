#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mokd/moo_solver.hpp"
#include "mokd/numerics.hpp"

namespace mokd {

enum class ControllerMode { exact, amortized, fixed_weights };

// Which per-task signal drives the amortized weight update: the observed
// log-loss improvement across the step (default, matches the iteration's
// data flow) or the raw log-loss values at the current iterate.
enum class AmortizedSignal { improvement, raw_log_loss };

struct ControllerConfig {
  ControllerMode mode = ControllerMode::exact;
  double eta_pi = 0.025;
  double gamma = 1.0;  // min-max weighting knob; absorbed into the step size
  BaselineWeights fixed_alpha{0.5, 0.5};
  AmortizedSignal amortized_signal = AmortizedSignal::improvement;

  void validate() const;
};

// Per-task positive scalar losses. Positivity is load-bearing: the exact
// controller takes log-gradients, so every loss must admit a logarithm.
class LossVector {
public:
  explicit LossVector(std::vector<double> values);

  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& values() const { return v_; }

private:
  std::vector<double> v_;
};

// Relative per-step loss decrease, (before - after) / before per task.
struct ImprovementRates {
  std::vector<double> values;
};

// Mutable per-run weight state; owned by exactly one training run.
struct ControllerState {
  explicit ControllerState(std::size_t k)
      : pi(SimplexWeights::equal(k)) {}

  SimplexWeights pi;
  long step_count = 0;
  std::optional<LossVector> last_losses;
};

// Chain rule for the log transform: grad(log L) = grad(L) / L.
Vector log_gradient(const Vector& g, double loss);

ImprovementRates rates(const LossVector& before, const LossVector& after);

struct ExactStep {
  SimplexWeights pi;
  Vector update;
};

// Two-backward-pass mode: log-transform the per-task gradients, solve for
// the simplex weights (closed form at k = 2, projected-gradient QP
// otherwise), and return the combined update.
ExactStep step_exact(ControllerState& state, const TaskJacobian& grads, const LossVector& losses);

// Single-backward-pass mode: one gradient step on
// 1/2 (sum_i pi_i u_i)^2 followed by softmax renormalization. The signal u
// is supplied by the caller per ControllerConfig::amortized_signal.
SimplexWeights step_amortized(ControllerState& state, const Vector& u, const ControllerConfig& cfg);

// Fixed-weight baseline: alpha1 g1 + alpha2 g2 on the raw gradients; the
// state's pi is set to the normalized alphas so traces stay comparable.
Vector step_fixed(ControllerState& state, const TaskJacobian& grads, const ControllerConfig& cfg);

}  // namespace mokd
