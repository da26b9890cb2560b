#include "mokd/kd_losses.hpp"

#include <algorithm>
#include <cmath>

namespace mokd {

namespace {

constexpr double kSubspaceEps = 1e-8;

Vector log_softmax(const Vector& a) {
  const double m = *std::max_element(a.values().begin(), a.values().end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::exp(a[i] - m);
  const double lse = m + std::log(sum);
  Vector out = Vector::zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - lse;
  return out;
}

}  // namespace

double kl_distill(const Logits& student, const Logits& teacher, double temperature) {
  if (student.size() != teacher.size()) throw DimensionError("kl_distill: length mismatch");
  if (!(temperature > 0.0)) throw DomainError("kl_distill: temperature must be positive");
  const double inv_t = 1.0 / temperature;
  const Vector lp = log_softmax(scaled(teacher, inv_t));
  const Vector lq = log_softmax(scaled(student, inv_t));
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  }
  return std::max(kl, 0.0) * temperature * temperature;
}

Vector kl_distill_grad_student(const Logits& student, const Logits& teacher, double temperature) {
  if (student.size() != teacher.size()) throw DimensionError("kl_distill: length mismatch");
  if (!(temperature > 0.0)) throw DomainError("kl_distill: temperature must be positive");
  const double inv_t = 1.0 / temperature;
  const Vector p = softmax(scaled(teacher, inv_t));
  const Vector q = softmax(scaled(student, inv_t));
  Vector g = Vector::zeros(student.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = temperature * (q[i] - p[i]);
  return g;
}

double normalized_l1(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("normalized_l1: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("normalized_l1: zero vector");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] / na - b[i] / nb);
  return s;
}

Vector normalized_l1_grad_a(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("normalized_l1: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("normalized_l1: zero vector");
  Vector a_hat = scaled(a, 1.0 / na);
  Vector sgn = Vector::zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a_hat[i] - b[i] / nb;
    sgn[i] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  const double proj = dot(a_hat, sgn);
  Vector g = Vector::zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = (sgn[i] - a_hat[i] * proj) / na;
  return g;
}

double cross_entropy(const Logits& student, std::size_t label) {
  if (label >= student.size()) throw DomainError("cross_entropy: label out of range");
  return -log_softmax(student)[label];
}

Vector cross_entropy_grad(const Logits& student, std::size_t label) {
  if (label >= student.size()) throw DomainError("cross_entropy: label out of range");
  Vector g = softmax(student);
  g[label] -= 1.0;
  return g;
}

double subspace_distill(const SubspaceMap& map, const FeaturePair& f) {
  const double s = similarity(map, f);
  const Vector zt_hat = project(map.p_t, f.z_t);
  const Vector zs_hat = project(map.p_s, f.z_s);
  const double denom = norm(zt_hat) * norm(zs_hat) + kSubspaceEps;
  return 1.0 - s / denom + 2.0;
}

SubspaceDistillGrads subspace_distill_grads(const SubspaceMap& map, const FeaturePair& f) {
  const double s = similarity(map, f);
  const SimilarityGrads sg = similarity_grads(map, f);
  const Vector zt_hat = project(map.p_t, f.z_t);
  const Vector zs_hat = project(map.p_s, f.z_s);
  const double nt = norm(zt_hat);
  const double ns = norm(zs_hat);
  const double denom = nt * ns + kSubspaceEps;
  const double inv = 1.0 / denom;
  const double s_over_d2 = s * inv * inv;

  // L = 3 - s / (nt ns + eps); product rule through both the similarity and
  // the feature norms. Zero-norm features get the zero-subgradient
  // convention for the norm factor.
  SubspaceDistillGrads out{
      Vector::zeros(map.n_s()),
      Vector::zeros(map.n()),
      Matrix::zeros(map.n(), map.n_t()),
      Matrix::zeros(map.n(), map.n_s()),
  };

  // d(nt ns)/dz_s = nt * P_s^T zs_hat / ns
  Vector dn_dzs = Vector::zeros(map.n_s());
  if (ns > 0.0) {
    dn_dzs = matvec_t(map.p_s, zs_hat);
    for (std::size_t i = 0; i < dn_dzs.size(); ++i) dn_dzs[i] *= nt / ns;
  }
  for (std::size_t i = 0; i < out.d_zs.size(); ++i) {
    out.d_zs[i] = -sg.d_zs[i] * inv + s_over_d2 * dn_dzs[i];
  }

  for (std::size_t i = 0; i < map.n(); ++i) out.d_d[i] = -sg.d_d[i] * inv;

  for (std::size_t i = 0; i < map.n(); ++i) {
    const double zt_unit = nt > 0.0 ? zt_hat[i] / nt : 0.0;
    const double zs_unit = ns > 0.0 ? zs_hat[i] / ns : 0.0;
    for (std::size_t j = 0; j < map.n_t(); ++j) {
      const double dn = ns * zt_unit * f.z_t[j];
      out.d_pt(i, j) = -sg.d_pt(i, j) * inv + s_over_d2 * dn;
    }
    for (std::size_t j = 0; j < map.n_s(); ++j) {
      const double dn = nt * zs_unit * f.z_s[j];
      out.d_ps(i, j) = -sg.d_ps(i, j) * inv + s_over_d2 * dn;
    }
  }
  return out;
}

LossVector assemble_losses(LossGrouping grouping, const LossComponents& c) {
  if (!(c.kl > 0.0) || !(c.kd > 0.0) || !(c.cls > 0.0)) {
    throw DomainError("assemble_losses: every component must be strictly positive");
  }
  if (grouping == LossGrouping::two_task) {
    return LossVector({c.kl + c.kd, c.cls});
  }
  return LossVector({c.kl, c.kd, c.cls});
}

}  // namespace mokd
