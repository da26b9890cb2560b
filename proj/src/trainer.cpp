#include "mokd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mokd/subspace.hpp"

namespace mokd {

void TrainConfig::validate() const {
  controller.validate();
  if (!(eta_theta > 0.0)) throw ConfigError("config: eta_theta must be positive");
  if (steps < 1) throw ConfigError("config: steps must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("config: temperature must be positive");
  if (controller.mode == ControllerMode::fixed_weights && grouping == LossGrouping::three_task) {
    throw ConfigError("config: fixed mode supports two tasks only");
  }
  if (task == TaskKind::two_quadratic) {
    if (quad.dim < 1) throw ConfigError("config: quadratic dim must be >= 1");
    if (quad.pareto_samples < 2) throw ConfigError("config: pareto_samples must be >= 2");
    if (subspace.enabled) throw ConfigError("config: subspace has no features on two_quadratic");
    if (grouping == LossGrouping::three_task) {
      throw ConfigError("config: two_quadratic is a two-task workload");
    }
  } else {
    if (kd.classes < 2 || kd.n_points < kd.classes || kd.input_dim < 2) {
      throw ConfigError("config: dataset sizes need N >= k >= 2, d >= 2");
    }
    if (kd.teacher_width == 0 || kd.student_width == 0 || kd.batch_size == 0) {
      throw ConfigError("config: widths and batch_size must be positive");
    }
    if (kd.teacher_epochs < 0 || !(kd.teacher_lr > 0.0)) {
      throw ConfigError("config: teacher pretraining settings out of range");
    }
    if (subspace.enabled && subspace.n < std::max(kd.teacher_width, kd.student_width)) {
      throw ConfigError("config: subspace n must be >= max feature width");
    }
  }
}

double conflict_score(const Vector& g1, const Vector& g2) { return dot(g1, g2); }

double dominance_score(const Vector& g1, const Vector& g2) {
  if (g1.size() != g2.size()) throw DimensionError("dominance_score: length mismatch");
  const double n2 = norm(g2);
  if (n2 == 0.0) throw DomainError("dominance_score: task gradient has zero norm");
  return std::log10(norm(g1) / n2);
}

bool pareto_dominates(const LossVector& a, const LossVector& b) {
  if (a.size() != b.size()) throw DimensionError("pareto_dominates: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] < b[i])) return false;
  }
  return true;
}

namespace {

class QuadraticWorkload final : public Workload {
public:
  QuadraticWorkload(const TrainConfig& cfg)
      : pair_(cfg.quad.conflict ? make_conflict_quadratic_pair(cfg.seed, cfg.quad.dim)
                                : make_random_quadratic_pair(cfg.seed, cfg.quad.dim)),
        theta_(Vector::zeros(cfg.quad.dim)) {
    Rng rng = Rng(cfg.seed).fork(13);
    for (std::size_t i = 0; i < theta_.size(); ++i) {
      theta_[i] = cfg.quad.theta0_scale * rng.gaussian();
    }
    front_.reserve(cfg.quad.pareto_samples);
    for (std::size_t i = 0; i < cfg.quad.pareto_samples; ++i) {
      const double w = static_cast<double>(i) / static_cast<double>(cfg.quad.pareto_samples - 1);
      front_.push_back(quad_pareto_point(pair_, w));
    }
  }

  std::size_t task_count() const override { return 2; }
  std::size_t param_count() const override { return theta_.size(); }
  std::size_t student_param_count() const override { return theta_.size(); }
  void next_batch() override {}

  LossVector eval_losses() override {
    counters_.loss_only_evals += 1;
    return quad_losses(pair_, theta_).losses;
  }

  PerTaskEval eval_per_task() override {
    counters_.per_task_grad_evals += 2;
    QuadEval e = quad_losses(pair_, theta_);
    return PerTaskEval{e.losses, TaskJacobian({std::move(e.g1), std::move(e.g2)})};
  }

  CombinedEval eval_combined(const SimplexWeights& pi) override {
    counters_.combined_grad_evals += 1;
    QuadEval e = quad_losses(pair_, theta_);
    Vector combined = scaled(e.g1, pi[0] / e.losses[0]);
    axpy(pi[1] / e.losses[1], e.g2, combined);
    return CombinedEval{e.losses, std::move(combined)};
  }

  void apply_update(const Vector& update, double eta) override {
    axpy(-eta, update, theta_);
  }

  std::optional<double> pareto_distance_now() const override {
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& p : front_) best = std::min(best, norm(sub(theta_, p)));
    return best;
  }

  const Vector& theta() const { return theta_; }
  const QuadraticPair& pair() const { return pair_; }

private:
  QuadraticPair pair_;
  Vector theta_;
  std::vector<Vector> front_;
};

// Shared implementation of the blobs classification task and the
// classification+regression analog. The teacher is pretrained at
// construction and frozen; its outputs are cached per dataset point.
class KdWorkload final : public Workload {
public:
  KdWorkload(const TrainConfig& cfg) : cfg_(cfg), detection_(cfg.task == TaskKind::toy_detection) {
    const KdTaskParams& kp = cfg.kd;
    if (detection_) {
      DetectionDataset det = make_toy_detection(cfg.seed, kp.n_points, kp.input_dim, kp.classes);
      offsets_ = std::make_unique<Matrix>(std::move(det.offsets));
      data_ = std::make_unique<BlobDataset>(std::move(det.blobs));
      teacher_ = std::make_unique<MlpParams>(
          train_teacher_detector({*data_, *offsets_}, kp.teacher_width, Rng(cfg.seed).fork(22),
                                 kp.teacher_epochs, kp.teacher_lr, 64));
    } else {
      data_ = std::make_unique<BlobDataset>(
          make_blobs(cfg.seed, kp.n_points, kp.input_dim, kp.classes));
      teacher_ = std::make_unique<MlpParams>(train_teacher_classifier(
          *data_, kp.teacher_width, Rng(cfg.seed).fork(22), kp.teacher_epochs, kp.teacher_lr, 64));
    }
    const std::size_t out = kp.classes + (detection_ ? 2 : 0);
    Rng srng = Rng(cfg.seed).fork(23);
    student_ = std::make_unique<MlpParams>(
        make_mlp(srng, kp.input_dim, kp.student_width, kp.student_width, out));

    // Frozen teacher: logits and features per point are fixed for the run.
    teacher_logits_.reserve(data_->inputs.rows());
    teacher_features_.reserve(data_->inputs.rows());
    for (std::size_t i = 0; i < data_->inputs.rows(); ++i) {
      MlpOutput o = mlp_forward(*teacher_, input_row(i));
      teacher_logits_.push_back(std::move(o.logits));
      teacher_features_.push_back(std::move(o.features));
    }

    if (cfg.subspace.enabled) {
      Rng prng = Rng(cfg.seed).fork(24);
      map_ = std::make_unique<SubspaceMap>(
          init_subspace(cfg.subspace.n, kp.teacher_width, kp.student_width, prng));
    }

    shuffle_rng_ = std::make_unique<Rng>(Rng(cfg.seed).fork(31));
    order_ = data_->train_idx;
    reshuffle();
  }

  std::size_t task_count() const override {
    return cfg_.grouping == LossGrouping::three_task ? 3 : 2;
  }

  std::size_t student_param_count() const override { return mlp_param_count(*student_); }

  std::size_t param_count() const override {
    std::size_t n = student_param_count();
    if (map_) n += map_->p_t.values().size() + map_->p_s.values().size() + map_->d.size();
    return n;
  }

  void next_batch() override {
    const std::size_t b = cfg_.kd.batch_size;
    if (pos_ + b > order_.size()) reshuffle();
    batch_.assign(order_.begin() + pos_, order_.begin() + std::min(pos_ + b, order_.size()));
    pos_ += batch_.size();
  }

  LossVector eval_losses() override {
    counters_.loss_only_evals += 1;
    return assemble(batch_components());
  }

  PerTaskEval eval_per_task() override {
    const std::size_t k = task_count();
    counters_.per_task_grad_evals += static_cast<long>(k);
    const LossVector losses = assemble(batch_components());
    std::vector<Vector> rows;
    rows.reserve(k);
    for (std::size_t task = 0; task < k; ++task) {
      rows.push_back(backward_for(task_weights(task)));
    }
    return PerTaskEval{losses, TaskJacobian(std::move(rows))};
  }

  CombinedEval eval_combined(const SimplexWeights& pi) override {
    counters_.combined_grad_evals += 1;
    const LossVector losses = assemble(batch_components());
    // One backward pass with upstream sum_i (pi_i / L_i) dL_i/d(outputs).
    ComponentWeights w{};
    const std::size_t k = task_count();
    if (pi.size() != k) throw DimensionError("eval_combined: weight count mismatch");
    for (std::size_t task = 0; task < k; ++task) {
      const ComponentWeights tw = task_weights(task);
      const double c = pi[task] / losses[task];
      w.kl += c * tw.kl;
      w.kd += c * tw.kd;
      w.cls += c * tw.cls;
      w.reg += c * tw.reg;
    }
    return CombinedEval{losses, backward_for(w)};
  }

  void apply_update(const Vector& update, double eta) override {
    if (update.size() != param_count()) throw DimensionError("apply_update: length mismatch");
    const std::size_t ns = student_param_count();
    std::vector<double> flat(ns);
    mlp_flatten_into(*student_, flat.data());
    for (std::size_t i = 0; i < ns; ++i) flat[i] -= eta * update[i];
    mlp_unflatten_from(*student_, flat.data());
    if (map_) {
      std::size_t off = ns;
      for (double& x : map_->p_t.values()) x -= eta * update[off++];
      for (double& x : map_->p_s.values()) x -= eta * update[off++];
      for (double& x : map_->d) x -= eta * update[off++];
      *map_ = retract(*map_);
    }
  }

  std::optional<double> orthonormality_defect() const override {
    if (!map_) return std::nullopt;
    auto defect = [](const Matrix& p) {
      double worst = 0.0;
      for (std::size_t i = 0; i < p.cols(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < p.rows(); ++t) s += p(t, i) * p(t, j);
          worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
      }
      return worst;
    };
    return std::max(defect(map_->p_t), defect(map_->p_s));
  }

  const SubspaceMap* adapter() const { return map_.get(); }

private:
  // Scalar multipliers on each component's output-gradient, defining which
  // scalar function of the network outputs a backward pass differentiates.
  struct ComponentWeights {
    double kl = 0.0;
    double kd = 0.0;
    double cls = 0.0;
    double reg = 0.0;
  };

  struct Components {
    double kl = 0.0;
    double kd = 0.0;
    double cls = 0.0;
    double reg = 0.0;
  };

  Vector input_row(std::size_t i) const {
    Vector v = Vector::zeros(data_->inputs.cols());
    for (std::size_t j = 0; j < data_->inputs.cols(); ++j) v[j] = data_->inputs(i, j);
    return v;
  }

  Vector class_logits(const Vector& logits) const {
    if (!detection_) return logits;
    Vector v = Vector::zeros(cfg_.kd.classes);
    for (std::size_t i = 0; i < cfg_.kd.classes; ++i) v[i] = logits[i];
    return v;
  }

  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng_->next_u64() % i;
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }

  ComponentWeights task_weights(std::size_t task) const {
    // Which components belong to which task under the active grouping.
    if (cfg_.grouping == LossGrouping::two_task) {
      if (task == 0) return ComponentWeights{1.0, 1.0, 0.0, 0.0};
      return ComponentWeights{0.0, 0.0, 1.0, 1.0};
    }
    if (detection_) {
      // (distill, cls, reg)
      if (task == 0) return ComponentWeights{1.0, 1.0, 0.0, 0.0};
      if (task == 1) return ComponentWeights{0.0, 0.0, 1.0, 0.0};
      return ComponentWeights{0.0, 0.0, 0.0, 1.0};
    }
    // (kl, kd, cls)
    if (task == 0) return ComponentWeights{1.0, 0.0, 0.0, 0.0};
    if (task == 1) return ComponentWeights{0.0, 1.0, 0.0, 0.0};
    return ComponentWeights{0.0, 0.0, 1.0, 0.0};
  }

  Components batch_components() {
    if (batch_.empty()) throw Error("kd workload: evaluation before the first batch");
    Components c{};
    const double inv_b = 1.0 / static_cast<double>(batch_.size());
    for (std::size_t idx : batch_) {
      const Vector x = input_row(idx);
      const MlpOutput fwd = mlp_forward(*student_, x);
      const Vector s_cls = class_logits(fwd.logits);
      const Vector& t_cls_full = teacher_logits_[idx];
      const Vector t_cls = detection_ ? class_logits(t_cls_full) : t_cls_full;
      c.kl += inv_b * kl_distill(s_cls, t_cls, cfg_.temperature);
      if (map_) {
        c.kd += inv_b * subspace_distill(*map_, FeaturePair{teacher_features_[idx], fwd.features});
      } else {
        c.kd += inv_b * normalized_l1(s_cls, t_cls);
      }
      c.cls += inv_b * cross_entropy(s_cls, data_->labels[idx]);
      if (detection_) {
        for (std::size_t j = 0; j < 2; ++j) {
          c.reg += inv_b * 0.5 * std::abs(fwd.logits[cfg_.kd.classes + j] - (*offsets_)(idx, j));
        }
      }
    }
    return c;
  }

  void require_positive(double v, const char* name) const {
    if (!(v > 0.0)) {
      throw DomainError(std::string("loss ") + name + " became non-positive during training");
    }
  }

  LossVector assemble(const Components& c) const {
    require_positive(c.kl, "L_kl");
    require_positive(c.kd, "L_kd");
    require_positive(c.cls, "L_cls");
    if (!detection_) {
      return assemble_losses(cfg_.grouping, LossComponents{c.kl, c.kd, c.cls});
    }
    require_positive(c.reg, "L_reg");
    if (cfg_.grouping == LossGrouping::two_task) {
      return LossVector({c.kl + c.kd, c.cls + c.reg});
    }
    return LossVector({c.kl + c.kd, c.cls, c.reg});
  }

  // One backward pass over the batch for the scalar
  //   w.kl L_kl + w.kd L_kd + w.cls L_cls + w.reg L_reg,
  // returning the flat gradient over student (+ adapter) parameters.
  Vector backward_for(const ComponentWeights& w) {
    if (batch_.empty()) throw Error("kd workload: evaluation before the first batch");
    MlpParams acc = mlp_zeros_like(*student_);
    Matrix d_pt = map_ ? Matrix::zeros(map_->n(), map_->n_t()) : Matrix::zeros(1, 1);
    Matrix d_ps = map_ ? Matrix::zeros(map_->n(), map_->n_s()) : Matrix::zeros(1, 1);
    Vector d_d = map_ ? Vector::zeros(map_->n()) : Vector::zeros(1);

    const double inv_b = 1.0 / static_cast<double>(batch_.size());
    const std::size_t k = cfg_.kd.classes;
    for (std::size_t idx : batch_) {
      const Vector x = input_row(idx);
      const MlpOutput fwd = mlp_forward(*student_, x);
      const Vector s_cls = class_logits(fwd.logits);
      const Vector& t_full = teacher_logits_[idx];
      const Vector t_cls = detection_ ? class_logits(t_full) : t_full;

      Vector d_cls_logits = Vector::zeros(s_cls.size());
      if (w.kl != 0.0) {
        axpy(w.kl * inv_b, kl_distill_grad_student(s_cls, t_cls, cfg_.temperature), d_cls_logits);
      }
      if (w.kd != 0.0 && !map_) {
        axpy(w.kd * inv_b, normalized_l1_grad_a(s_cls, t_cls), d_cls_logits);
      }
      if (w.cls != 0.0) {
        axpy(w.cls * inv_b, cross_entropy_grad(s_cls, data_->labels[idx]), d_cls_logits);
      }

      MlpUpstream up{Vector::zeros(student_->output_dim()),
                     Vector::zeros(student_->feature_dim())};
      for (std::size_t i = 0; i < s_cls.size(); ++i) up.d_logits[i] = d_cls_logits[i];
      if (detection_ && w.reg != 0.0) {
        for (std::size_t j = 0; j < 2; ++j) {
          const double diff = fwd.logits[k + j] - (*offsets_)(idx, j);
          up.d_logits[k + j] =
              w.reg * inv_b * 0.5 * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
        }
      }
      if (w.kd != 0.0 && map_) {
        const SubspaceDistillGrads sg =
            subspace_distill_grads(*map_, FeaturePair{teacher_features_[idx], fwd.features});
        axpy(w.kd * inv_b, sg.d_zs, up.d_features);
        const double c = w.kd * inv_b;
        for (std::size_t i = 0; i < d_pt.values().size(); ++i) {
          d_pt.values()[i] += c * sg.d_pt.values()[i];
        }
        for (std::size_t i = 0; i < d_ps.values().size(); ++i) {
          d_ps.values()[i] += c * sg.d_ps.values()[i];
        }
        axpy(c, sg.d_d, d_d);
      }
      mlp_accumulate(acc, mlp_backward(*student_, x, up), 1.0);
    }

    std::vector<double> flat(param_count(), 0.0);
    mlp_flatten_into(acc, flat.data());
    if (map_) {
      std::size_t off = student_param_count();
      for (double v : d_pt.values()) flat[off++] = v;
      for (double v : d_ps.values()) flat[off++] = v;
      for (std::size_t i = 0; i < d_d.size(); ++i) flat[off++] = d_d[i];
    }
    return Vector(std::move(flat));
  }

  TrainConfig cfg_;
  bool detection_;
  std::unique_ptr<BlobDataset> data_;
  std::unique_ptr<Matrix> offsets_;
  std::unique_ptr<MlpParams> teacher_;
  std::unique_ptr<MlpParams> student_;
  std::vector<Vector> teacher_logits_;
  std::vector<Vector> teacher_features_;
  std::unique_ptr<SubspaceMap> map_;
  std::unique_ptr<Rng> shuffle_rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> batch_;
};

}  // namespace

std::unique_ptr<Workload> make_workload(const TrainConfig& cfg) {
  if (cfg.task == TaskKind::two_quadratic) return std::make_unique<QuadraticWorkload>(cfg);
  return std::make_unique<KdWorkload>(cfg);
}

TrainRun::TrainRun(TrainConfig cfg) : cfg_(std::move(cfg)), state_(1) {
  cfg_.validate();
  workload_ = make_workload(cfg_);
  state_ = ControllerState(workload_->task_count());
}

TraceRow TrainRun::step(const StepObserver& observer) {
  iter_ += 1;
  workload_->next_batch();

  TraceRow row;
  row.iter = iter_;
  std::optional<TaskJacobian> raw;
  Vector update = Vector::zeros(1);
  std::vector<double> losses_used;

  switch (cfg_.controller.mode) {
    case ControllerMode::exact: {
      PerTaskEval e = workload_->eval_per_task();
      ExactStep s = step_exact(state_, e.grads, e.losses);
      losses_used = e.losses.values();
      row.pi = s.pi.values();
      update = std::move(s.update);
      raw = std::move(e.grads);
      workload_->apply_update(update, cfg_.eta_theta);
      break;
    }
    case ControllerMode::fixed_weights: {
      PerTaskEval e = workload_->eval_per_task();
      update = step_fixed(state_, e.grads, cfg_.controller);
      losses_used = e.losses.values();
      row.pi = state_.pi.values();
      raw = std::move(e.grads);
      workload_->apply_update(update, cfg_.eta_theta);
      break;
    }
    case ControllerMode::amortized: {
      CombinedEval e = workload_->eval_combined(state_.pi);
      losses_used = e.losses.values();
      row.pi = state_.pi.values();  // the weights that produced this update
      update = std::move(e.combined);
      workload_->apply_update(update, cfg_.eta_theta);
      LossVector after = workload_->eval_losses();  // frozen model inference
      step_rates_ = rates(e.losses, after);
      Vector u = Vector::zeros(losses_used.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = cfg_.controller.amortized_signal == AmortizedSignal::improvement
                   ? std::log(losses_used[i]) - std::log(after[i])
                   : std::log(losses_used[i]);
      }
      step_amortized(state_, u, cfg_.controller);
      state_.last_losses = e.losses;
      last_post_losses_ = std::move(after);
      break;
    }
  }

  row.losses = losses_used;
  if (raw && raw->task_count() == 2) {
    row.conflict = conflict_score(raw->row(0), raw->row(1));
    const double n2 = norm(raw->row(1));
    if (n2 > 0.0) row.dominance_log10 = dominance_score(raw->row(0), raw->row(1));
  }
  row.gstar_norm = norm(update);
  row.pareto_dist = workload_->pareto_distance_now();
  row.backward_count = workload_->counters().backward_passes();

  if (observer) {
    StepEvent ev;
    ev.iter = iter_;
    ev.losses = row.losses;
    ev.pi = row.pi;
    ev.raw_grads = raw ? &*raw : nullptr;
    ev.rates = step_rates_ ? &*step_rates_ : nullptr;
    ev.update = &update;
    observer(ev);
  }
  trace_.push_back(row);
  return row;
}

RunSummary TrainRun::finish() {
  RunSummary s;
  s.steps = iter_;
  s.final_pi = state_.pi.values();
  s.final_losses =
      last_post_losses_ ? last_post_losses_->values() : workload_->eval_losses().values();
  s.counters = workload_->counters();
  s.student_params = workload_->student_param_count();
  for (const TraceRow& r : trace_) {
    if (r.pareto_dist) {
      if (!s.min_pareto_distance || *r.pareto_dist < *s.min_pareto_distance) {
        s.min_pareto_distance = r.pareto_dist;
      }
      s.final_pareto_distance = r.pareto_dist;
    }
  }
  return s;
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string trace_csv(const std::vector<TraceRow>& rows, std::size_t task_count) {
  std::ostringstream out;
  if (task_count == 2) {
    out << "iter,loss_distill,loss_task,pi_distill,pi_task,conflict,dominance_log10,"
           "gstar_norm,pareto_dist,backward_count\n";
  } else {
    out << "iter";
    for (std::size_t i = 0; i < task_count; ++i) out << ",loss_" << i;
    for (std::size_t i = 0; i < task_count; ++i) out << ",pi_" << i;
    out << ",conflict,dominance_log10,gstar_norm,pareto_dist,backward_count\n";
  }
  for (const TraceRow& r : rows) {
    out << r.iter;
    for (double v : r.losses) out << ',' << fmt17(v);
    for (double v : r.pi) out << ',' << fmt17(v);
    out << ',' << (r.conflict ? fmt17(*r.conflict) : "");
    out << ',' << (r.dominance_log10 ? fmt17(*r.dominance_log10) : "");
    out << ',' << fmt17(r.gstar_norm);
    out << ',' << (r.pareto_dist ? fmt17(*r.pareto_dist) : "");
    out << ',' << r.backward_count << '\n';
  }
  return out.str();
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows,
                     std::size_t task_count) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_trace_csv: cannot open " + path);
  f << trace_csv(rows, task_count);
  if (!f) throw Error("write_trace_csv: write failed for " + path);
}

RunSummary run_experiment(const TrainConfig& cfg, std::vector<TraceRow>* trace_out,
                          const StepObserver& observer) {
  TrainRun run(cfg);
  for (long t = 0; t < cfg.steps; ++t) run.step(observer);
  RunSummary s = run.finish();
  if (!cfg.trace_path.empty()) {
    write_trace_csv(cfg.trace_path, run.trace(), run.workload().task_count());
  }
  if (trace_out) *trace_out = run.trace();
  return s;
}

}  // namespace mokd
