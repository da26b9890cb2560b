#include "mokd/moo_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mokd {

SimplexWeights::SimplexWeights(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw DimensionError("SimplexWeights: need k >= 1");
  double sum = 0.0;
  for (double& x : w_) {
    if (!std::isfinite(x) || x < -1e-12 || x > 1.0 + 1e-12) {
      throw DomainError("SimplexWeights: entry outside [0, 1]");
    }
    x = std::clamp(x, 0.0, 1.0);
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("SimplexWeights: entries must sum to 1");
}

SimplexWeights SimplexWeights::equal(std::size_t k) {
  return SimplexWeights(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

TaskJacobian::TaskJacobian(std::vector<Vector> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw DimensionError("TaskJacobian: need k >= 1");
  for (const Vector& r : rows_) {
    if (r.size() != rows_.front().size()) {
      throw DimensionError("TaskJacobian: gradient lengths differ");
    }
  }
}

double gram2_denominator_epsilon(const GramMatrix2& g) {
  return 1e-15 * std::max({g.g11, g.g22, 1.0});
}

GramMatrix2 gram2(const Vector& g1, const Vector& g2) {
  if (g1.size() != g2.size()) throw DimensionError("gram2: length mismatch");
  return GramMatrix2{dot(g1, g1), dot(g2, g2), dot(g1, g2)};
}

std::pair<double, double> solve_closed_form_raw(const GramMatrix2& g) {
  const double den = g.g11 + g.g22 - 2.0 * g.g12;
  if (den <= gram2_denominator_epsilon(g)) {
    throw DegeneracyError("solve_closed_form_raw: degenerate denominator");
  }
  const double pi1 = (g.g22 - g.g12) / den;
  return {pi1, 1.0 - pi1};
}

SimplexWeights solve_closed_form(const GramMatrix2& g) {
  const double den = g.g11 + g.g22 - 2.0 * g.g12;
  if (den <= gram2_denominator_epsilon(g)) {
    return SimplexWeights({0.5, 0.5});
  }
  double pi1 = (g.g22 - g.g12) / den;
  // Convex quadratic in pi1, so the simplex optimum is the clamp of the
  // equality-constrained stationary point.
  pi1 = std::clamp(pi1, 0.0, 1.0);
  return SimplexWeights({pi1, 1.0 - pi1});
}

Vector combine(const TaskJacobian& grads, const SimplexWeights& pi) {
  if (grads.task_count() != pi.size()) throw DimensionError("combine: weight count mismatch");
  Vector out = Vector::zeros(grads.dim());
  for (std::size_t i = 0; i < grads.task_count(); ++i) {
    axpy(pi[i], grads.row(i), out);
  }
  return out;
}

Vector combine_fixed(const Vector& g1, const Vector& g2, const BaselineWeights& w) {
  if (g1.size() != g2.size()) throw DimensionError("combine_fixed: length mismatch");
  if (w.alpha1 <= 0.0 || w.alpha2 <= 0.0) throw DomainError("combine_fixed: weights must be positive");
  Vector out = scaled(g1, w.alpha1);
  axpy(w.alpha2, g2, out);
  return out;
}

double dual_objective(const GramMatrix2& g, const SimplexWeights& pi) {
  if (pi.size() != 2) throw DimensionError("dual_objective: needs k = 2");
  const double p1 = pi[0];
  const double p2 = pi[1];
  const double val = 0.5 * (p1 * p1 * g.g11 + p2 * p2 * g.g22 + 2.0 * p1 * p2 * g.g12);
  return std::max(val, 0.0);
}

std::vector<double> project_simplex(std::vector<double> v) {
  // Sort-based Euclidean projection onto {w >= 0, sum w = 1}.
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double tau = 0.0;
  std::size_t support = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      tau = t;
      support = j + 1;
    }
  }
  (void)support;
  for (double& x : v) x = std::max(x - tau, 0.0);
  return v;
}

namespace {

// Dense k x k Gram of the jacobian rows.
std::vector<double> gram_k(const TaskJacobian& grads) {
  const std::size_t k = grads.task_count();
  std::vector<double> g(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = dot(grads.row(i), grads.row(j));
      g[i * k + j] = v;
      g[j * k + i] = v;
    }
  }
  return g;
}

double lambda_max_estimate(const std::vector<double>& g, std::size_t k) {
  std::vector<double> v(k, 1.0 / std::sqrt(static_cast<double>(k)));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> w(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) w[i] += g[i * k + j] * v[j];
    }
    double nw = 0.0;
    for (double x : w) nw += x * x;
    nw = std::sqrt(nw);
    if (nw == 0.0) return 0.0;
    lambda = 0.0;
    for (std::size_t i = 0; i < k; ++i) lambda += v[i] * w[i];
    for (std::size_t i = 0; i < k; ++i) v[i] = w[i] / nw;
  }
  // The Rayleigh quotient approaches lambda_max from below; diagonal
  // dominance gives a second lower bound.
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, g[i * k + i]);
  return std::max(lambda, max_diag);
}

}  // namespace

SimplexWeights solve_simplex_qp(const TaskJacobian& grads, double tol) {
  if (tol <= 0.0) throw DomainError("solve_simplex_qp: tol must be positive");
  const std::size_t k = grads.task_count();
  if (k == 1) return SimplexWeights({1.0});

  const std::vector<double> g = gram_k(grads);
  const double lambda = lambda_max_estimate(g, k);
  if (lambda <= 0.0) return SimplexWeights::equal(k);  // all gradients zero
  const double step = 1.0 / lambda;
  const double stop = std::max(tol * 1e-3, 1e-15);

  std::vector<double> pi(k, 1.0 / static_cast<double>(k));
  constexpr int kMaxIter = 10000;
  for (int it = 0; it < kMaxIter; ++it) {
    std::vector<double> next(k);
    for (std::size_t i = 0; i < k; ++i) {
      double grad = 0.0;
      for (std::size_t j = 0; j < k; ++j) grad += g[i * k + j] * pi[j];
      next[i] = pi[i] - step * grad;
    }
    next = project_simplex(std::move(next));
    double move = 0.0;
    for (std::size_t i = 0; i < k; ++i) move = std::max(move, std::abs(next[i] - pi[i]));
    pi = std::move(next);
    if (move <= stop) return SimplexWeights(pi);
  }
  throw ConvergenceError("solve_simplex_qp: iteration cap reached", pi);
}

}  // namespace mokd
