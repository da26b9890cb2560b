#pragma once

#include <cstddef>
#include <vector>

#include "mokd/numerics.hpp"

namespace mokd {

// Teacher/student adapter: two column-orthonormal projections into a shared
// n-dimensional space plus a diagonal metric whose entries carry no sign
// constraint. p_t maps teacher features (length n_t) into the shared space,
// p_s does the same for student features (length n_s); n >= max(n_t, n_s).
struct SubspaceMap {
  Matrix p_t;             // n x n_t
  Matrix p_s;             // n x n_s
  std::vector<double> d;  // diagonal metric, length n

  std::size_t n() const { return p_t.rows(); }
  std::size_t n_t() const { return p_t.cols(); }
  std::size_t n_s() const { return p_s.cols(); }
};

struct FeaturePair {
  Vector z_t;
  Vector z_s;
};

// p z: embed a feature vector into the shared space.
Vector project(const Matrix& p, const Vector& z);

// s = (P_t z_t)^T diag(d) (P_s z_s).
double similarity(const SubspaceMap& map, const FeaturePair& f);

struct SimilarityGrads {
  Vector d_zs;   // ds/dz_s = P_s^T diag(d) z_t_hat
  Vector d_d;    // ds/dd_i = z_t_hat_i * z_s_hat_i
  Matrix d_pt;   // ds/dP_t = diag(d) z_s_hat z_t^T
  Matrix d_ps;   // ds/dP_s = diag(d) z_t_hat z_s^T
};

SimilarityGrads similarity_grads(const SubspaceMap& map, const FeaturePair& f);

// Re-orthonormalize both projections after a gradient step; d is untouched.
SubspaceMap retract(const SubspaceMap& map);

// Seeded Gaussian projections, orthonormalized; d starts as the identity
// metric and acquires indefiniteness only through training.
SubspaceMap init_subspace(std::size_t n, std::size_t n_t, std::size_t n_s, Rng& rng);

}  // namespace mokd
