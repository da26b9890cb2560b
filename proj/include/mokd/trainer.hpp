#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mokd/kd_losses.hpp"
#include "mokd/moo_solver.hpp"
#include "mokd/numerics.hpp"
#include "mokd/toy_tasks.hpp"
#include "mokd/weight_controller.hpp"

namespace mokd {

enum class TaskKind { two_quadratic, blobs_kd, toy_detection };

struct SubspaceSettings {
  bool enabled = false;
  std::size_t n = 0;
};

struct QuadTaskParams {
  std::size_t dim = 10;
  bool conflict = false;          // engineered anti-parallel instance
  std::size_t pareto_samples = 20001;
  double theta0_scale = 1.0;
};

struct KdTaskParams {
  std::size_t n_points = 4096;
  std::size_t input_dim = 32;
  std::size_t classes = 8;
  std::size_t teacher_width = 128;
  std::size_t student_width = 32;
  std::size_t batch_size = 128;
  int teacher_epochs = 20;
  double teacher_lr = 0.05;
};

struct TrainConfig {
  TaskKind task = TaskKind::two_quadratic;
  ControllerConfig controller;
  double eta_theta = 0.01;
  long steps = 100;
  std::uint64_t seed = 0;
  SubspaceSettings subspace;
  double temperature = 1.0;
  LossGrouping grouping = LossGrouping::two_task;
  std::string trace_path;  // empty: keep the trace in memory only
  QuadTaskParams quad;
  KdTaskParams kd;

  void validate() const;
};

// Gradient-evaluation accounting, kept by the workload so every access path
// is counted where it happens.
struct EvalCounters {
  long per_task_grad_evals = 0;
  long combined_grad_evals = 0;
  long loss_only_evals = 0;

  long backward_passes() const { return per_task_grad_evals + combined_grad_evals; }
};

struct PerTaskEval {
  LossVector losses;
  TaskJacobian grads;  // raw per-task gradients
};

struct CombinedEval {
  LossVector losses;
  Vector combined;  // sum_i pi_i grad log L_i, from a single backward pass
};

// Instrumented gradient provider. One instance drives one training run;
// evaluations refer to the current batch and parameter vector.
class Workload {
public:
  virtual ~Workload() = default;

  virtual std::size_t task_count() const = 0;
  virtual std::size_t param_count() const = 0;          // all trainable values
  virtual std::size_t student_param_count() const = 0;  // adapter excluded
  virtual void next_batch() = 0;
  virtual LossVector eval_losses() = 0;
  virtual PerTaskEval eval_per_task() = 0;
  virtual CombinedEval eval_combined(const SimplexWeights& pi) = 0;
  // params -= eta * update, followed by any retraction the workload needs.
  virtual void apply_update(const Vector& update, double eta) = 0;
  // Distance of the current iterate to the analytic Pareto set, where one
  // exists.
  virtual std::optional<double> pareto_distance_now() const { return std::nullopt; }
  // Max-norm orthonormality defect of the adapter projections, when present.
  virtual std::optional<double> orthonormality_defect() const { return std::nullopt; }

  const EvalCounters& counters() const { return counters_; }

protected:
  EvalCounters counters_;
};

std::unique_ptr<Workload> make_workload(const TrainConfig& cfg);

// One trace record per iteration. Loss/pi values are the ones that drove
// the step; pareto_dist refers to the post-step iterate; backward_count is
// cumulative. conflict/dominance need per-task gradients and stay empty in
// amortized mode (and for k != 2).
struct TraceRow {
  long iter = 0;
  std::vector<double> losses;
  std::vector<double> pi;
  std::optional<double> conflict;
  std::optional<double> dominance_log10;
  double gstar_norm = 0.0;
  std::optional<double> pareto_dist;
  long backward_count = 0;
};

// Per-step observation hook for tests and analyses that need more than the
// trace columns.
struct StepEvent {
  long iter = 0;
  std::vector<double> losses;
  std::vector<double> pi;
  const TaskJacobian* raw_grads = nullptr;       // null in amortized mode
  const ImprovementRates* rates = nullptr;       // amortized mode only
  const Vector* update = nullptr;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct RunSummary {
  std::vector<double> final_losses;
  std::vector<double> final_pi;
  std::optional<double> min_pareto_distance;
  std::optional<double> final_pareto_distance;
  EvalCounters counters;
  std::size_t student_params = 0;
  long steps = 0;
};

// <g_dist, g_task>; negative values flag conflicting gradients.
double conflict_score(const Vector& g1, const Vector& g2);
// log10(|g1| / |g2|); large magnitudes flag one objective dominating.
double dominance_score(const Vector& g1, const Vector& g2);
// Strict dominance: a beats b in every coordinate simultaneously.
bool pareto_dominates(const LossVector& a, const LossVector& b);

class TrainRun {
public:
  explicit TrainRun(TrainConfig cfg);

  TraceRow step(const StepObserver& observer = nullptr);
  RunSummary finish();

  const std::vector<TraceRow>& trace() const { return trace_; }
  const Workload& workload() const { return *workload_; }
  const ControllerState& controller_state() const { return state_; }

private:
  TrainConfig cfg_;
  std::unique_ptr<Workload> workload_;
  ControllerState state_;
  long iter_ = 0;
  std::vector<TraceRow> trace_;
  std::optional<ImprovementRates> step_rates_;  // per-step improvement, amortized mode
  std::optional<LossVector> last_post_losses_;  // amortized: reused as final losses
};

std::string trace_csv(const std::vector<TraceRow>& rows, std::size_t task_count);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows,
                     std::size_t task_count);

// Runs the configured experiment end to end: steps iterations, trace write
// (when trace_path is set), summary.
RunSummary run_experiment(const TrainConfig& cfg, std::vector<TraceRow>* trace_out = nullptr,
                          const StepObserver& observer = nullptr);

}  // namespace mokd
