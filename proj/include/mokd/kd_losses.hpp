#pragma once

#include "mokd/numerics.hpp"
#include "mokd/subspace.hpp"
#include "mokd/weight_controller.hpp"

namespace mokd {

// Unnormalized class scores.
using Logits = Vector;

enum class LossGrouping { two_task, three_task };

// Named scalar components of the classification objective. kl is the
// temperature-scaled divergence on logits, kd the feature-space term, cls
// the ground-truth term.
struct LossComponents {
  double kl = 0.0;
  double kd = 0.0;
  double cls = 0.0;
};

// Temperature-scaled KL divergence of the student's class distribution from
// the teacher's: KL(softmax(t/tau) || softmax(s/tau)) * tau^2.
double kl_distill(const Logits& student, const Logits& teacher, double temperature);
// d kl_distill / d student.
Vector kl_distill_grad_student(const Logits& student, const Logits& teacher, double temperature);

// L1 distance between the L2-unit-normalized inputs; invariant to positive
// rescaling of either argument.
double normalized_l1(const Vector& a, const Vector& b);
// d normalized_l1 / d a, with the sign-at-zero-is-zero convention.
Vector normalized_l1_grad_a(const Vector& a, const Vector& b);

double cross_entropy(const Logits& student, std::size_t label);
Vector cross_entropy_grad(const Logits& student, std::size_t label);

// Feature distillation loss from the subspace similarity:
//   1 - s / (|z_t_hat| * |z_s_hat| + eps) + 2,  eps = 1e-8.
// The +2 offset keeps the value strictly positive for moderate metric
// entries (the weight controller logs every loss); it does not affect
// gradients.
double subspace_distill(const SubspaceMap& map, const FeaturePair& f);

struct SubspaceDistillGrads {
  Vector d_zs;
  Vector d_d;
  Matrix d_pt;
  Matrix d_ps;
};

SubspaceDistillGrads subspace_distill_grads(const SubspaceMap& map, const FeaturePair& f);

// Groups the components into the per-task loss vector:
// two_task -> (kl + kd, cls); three_task -> (kl, kd, cls). All components
// must be strictly positive.
LossVector assemble_losses(LossGrouping grouping, const LossComponents& c);

}  // namespace mokd
