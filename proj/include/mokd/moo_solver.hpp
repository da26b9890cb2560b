#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mokd/numerics.hpp"

namespace mokd {

// 2x2 Gram matrix of a gradient pair: g11 = |g1|^2, g22 = |g2|^2,
// g12 = <g1, g2>. Plain aggregate so synthetic instances can be written
// down directly in tests and sweeps.
struct GramMatrix2 {
  double g11 = 0.0;
  double g22 = 0.0;
  double g12 = 0.0;
};

// Task-weight vector on the probability simplex: entries in [0,1],
// summing to 1 within 1e-12 (checked on construction).
class SimplexWeights {
public:
  explicit SimplexWeights(std::vector<double> weights);
  static SimplexWeights equal(std::size_t k);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& values() const { return w_; }

private:
  std::vector<double> w_;
};

// Fixed combination weights of the conventional weighted-sum baseline.
struct BaselineWeights {
  double alpha1 = 0.5;
  double alpha2 = 0.5;
};

// Stack of k per-task gradients of equal length.
class TaskJacobian {
public:
  explicit TaskJacobian(std::vector<Vector> rows);

  std::size_t task_count() const { return rows_.size(); }
  std::size_t dim() const { return rows_.front().size(); }
  const Vector& row(std::size_t i) const { return rows_[i]; }
  const std::vector<Vector>& rows() const { return rows_; }

private:
  std::vector<Vector> rows_;
};

// Degenerate-denominator threshold for the closed-form solve, scaled to be
// unit-robust.
double gram2_denominator_epsilon(const GramMatrix2& g);

GramMatrix2 gram2(const Vector& g1, const Vector& g2);

// Unconstrained-sign stationary point of 1/2 pi^T G pi under pi1 + pi2 = 1.
// Entries may fall outside [0,1]. Throws DegeneracyError when the
// denominator g11 + g22 - 2 g12 is below epsilon.
std::pair<double, double> solve_closed_form_raw(const GramMatrix2& g);

// Minimizer of 1/2 pi^T G pi over the full simplex: the raw stationary
// point clamped to [0,1], or (1/2, 1/2) when the denominator degenerates
// (every pi is then optimal). Total function.
SimplexWeights solve_closed_form(const GramMatrix2& g);

// Weighted gradient combination sum_i pi_i grad_i.
Vector combine(const TaskJacobian& grads, const SimplexWeights& pi);

// Fixed-weight baseline alpha1 g1 + alpha2 g2.
Vector combine_fixed(const Vector& g1, const Vector& g2, const BaselineWeights& w);

// 1/2 |J pi|^2 expressed through the Gram entries (k = 2); tiny negative
// rounding residue is clamped to 0.
double dual_objective(const GramMatrix2& g, const SimplexWeights& pi);

// Projected-gradient solver for min 1/2 |sum_i pi_i g_i|^2 over the simplex,
// any task count. Step size 1 / lambda_max(G) from power iteration, at most
// 10000 iterations. Serves as the oracle for solve_closed_form and as the
// production path for k > 2. Throws ConvergenceError (carrying the best
// iterate) if the movement criterion derived from tol is never met.
SimplexWeights solve_simplex_qp(const TaskJacobian& grads, double tol);

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v);

}  // namespace mokd
