#include "mokd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mokd {

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite entry");
  }
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix64(s);
}

}  // namespace

Vector::Vector(std::vector<double> values) : v_(std::move(values)) {
  if (v_.empty()) throw DimensionError("Vector: length must be >= 1");
  require_finite(v_, "Vector");
}

Vector::Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

Vector Vector::zeros(std::size_t n) { return Vector(std::vector<double>(n, 0.0)); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) throw DimensionError("Matrix: dimensions must be positive");
  if (v_.size() != rows_ * cols_) throw DimensionError("Matrix: value count does not match shape");
  require_finite(v_, "Matrix");
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
  // Box-Muller with u1 in (0, 1]; no cached second value so the stream
  // position is a pure function of the draw count.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

Vector softmax(const Vector& a) {
  double m = *std::max_element(a.values().begin(), a.values().end());
  Vector out = Vector::zeros(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::exp(a[i] - m);
    sum += out[i];
  }
  for (std::size_t i = 0; i < a.size(); ++i) out[i] /= sum;
  return out;
}

Matrix qr_orthonormalize(const Matrix& m) {
  const std::size_t r = m.rows();
  const std::size_t c = m.cols();
  if (r < c) throw DimensionError("qr_orthonormalize: need rows >= cols");
  Matrix q = m;
  auto col_dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t t = 0; t < r; ++t) s += q(t, i) * q(t, j);
    return s;
  };
  for (std::size_t j = 0; j < c; ++j) {
    const double orig = std::sqrt(col_dot(j, j));
    // Second pass restores orthogonality lost to cancellation.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double rij = col_dot(i, j);
        for (std::size_t t = 0; t < r; ++t) q(t, j) -= rij * q(t, i);
      }
    }
    const double rjj = std::sqrt(col_dot(j, j));
    if (rjj <= 1e-12 * orig || rjj == 0.0) {
      throw DegeneracyError("qr_orthonormalize: rank-deficient columns");
    }
    for (std::size_t t = 0; t < r; ++t) q(t, j) /= rjj;
  }
  return q;
}

Vector matvec(const Matrix& m, const Vector& x) {
  if (m.cols() != x.size()) throw DimensionError("matvec: shape mismatch");
  Vector y = Vector::zeros(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_t(const Matrix& m, const Vector& x) {
  if (m.rows() != x.size()) throw DimensionError("matvec_t: shape mismatch");
  Vector y = Vector::zeros(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += m(i, j) * x[i];
  }
  return y;
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve_spd: shape mismatch");
  // Lower-triangular Cholesky factor, in place on a copy.
  Matrix l = Matrix::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t t = 0; t < j; ++t) s -= l(i, t) * l(j, t);
      if (i == j) {
        if (s <= 0.0) throw DegeneracyError("solve_spd: matrix not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  Vector y = Vector::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t t = 0; t < i; ++t) s -= l(i, t) * y[t];
    y[i] = s / l(i, i);
  }
  Vector x = Vector::zeros(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t t = ii + 1; t < n; ++t) s -= l(t, ii) * x[t];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

void axpy(double alpha, const Vector& x, Vector& y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector scaled(const Vector& x, double alpha) {
  Vector y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= alpha;
  return y;
}

Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("add: length mismatch");
  Vector y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

Vector sub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("sub: length mismatch");
  Vector y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
  return y;
}

}  // namespace mokd
