#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "mokd/errors.hpp"

namespace mokd {

// Dense column vector of doubles. Entries are checked to be finite on
// construction; in-place mutation through operator[] is allowed afterwards
// (hot loops patch entries they just computed).
class Vector {
public:
  explicit Vector(std::vector<double> values);
  Vector(std::initializer_list<double> values);
  static Vector zeros(std::size_t n);

  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  double& operator[](std::size_t i) { return v_[i]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }
  const double* data() const { return v_.data(); }
  double* data() { return v_.data(); }

private:
  std::vector<double> v_;
};

// Dense row-major matrix.
class Matrix {
public:
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Matrix zeros(std::size_t rows, std::size_t cols);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> v_;
};

// Counter-based deterministic generator (splitmix64 core). The same seed
// yields the same stream on every platform; fork() derives independent
// substreams from the original seed so draw order elsewhere cannot shift
// them.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();                       // standard normal, Box-Muller
  Rng fork(std::uint64_t stream) const;
  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);
Vector softmax(const Vector& a);

// Orthonormalizes the columns of m (rows >= cols) by modified Gram-Schmidt
// with one re-orthogonalization pass. The implied triangular factor has a
// non-negative diagonal, so the result is deterministic. Rank-deficient
// input raises DegeneracyError.
Matrix qr_orthonormalize(const Matrix& m);

// y = m x for m: r x c, x length c.
Vector matvec(const Matrix& m, const Vector& x);
// y = m^T x for m: r x c, x length r.
Vector matvec_t(const Matrix& m, const Vector& x);

// Solves a x = b for symmetric positive-definite a via Cholesky.
Vector solve_spd(const Matrix& a, const Vector& b);

// Small mutating helpers shared by the training loops.
void axpy(double alpha, const Vector& x, Vector& y);  // y += alpha x
Vector scaled(const Vector& x, double alpha);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);

}  // namespace mokd
