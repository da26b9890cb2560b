#include "mokd/subspace.hpp"

namespace mokd {

Vector project(const Matrix& p, const Vector& z) { return matvec(p, z); }

namespace {

void check_shapes(const SubspaceMap& map, const FeaturePair& f) {
  if (map.p_s.rows() != map.p_t.rows() || map.d.size() != map.n()) {
    throw DimensionError("subspace: inconsistent map shapes");
  }
  if (f.z_t.size() != map.n_t() || f.z_s.size() != map.n_s()) {
    throw DimensionError("subspace: feature lengths do not match the map");
  }
}

}  // namespace

double similarity(const SubspaceMap& map, const FeaturePair& f) {
  check_shapes(map, f);
  const Vector zt_hat = matvec(map.p_t, f.z_t);
  const Vector zs_hat = matvec(map.p_s, f.z_s);
  double s = 0.0;
  for (std::size_t i = 0; i < map.n(); ++i) s += map.d[i] * zt_hat[i] * zs_hat[i];
  return s;
}

SimilarityGrads similarity_grads(const SubspaceMap& map, const FeaturePair& f) {
  check_shapes(map, f);
  const std::size_t n = map.n();
  const Vector zt_hat = matvec(map.p_t, f.z_t);
  const Vector zs_hat = matvec(map.p_s, f.z_s);

  Vector d_zt_hat = Vector::zeros(n);  // diag(d) z_t_hat
  Vector d_zs_hat = Vector::zeros(n);  // diag(d) z_s_hat
  for (std::size_t i = 0; i < n; ++i) {
    d_zt_hat[i] = map.d[i] * zt_hat[i];
    d_zs_hat[i] = map.d[i] * zs_hat[i];
  }

  SimilarityGrads out{
      matvec_t(map.p_s, d_zt_hat),
      Vector::zeros(n),
      Matrix::zeros(n, map.n_t()),
      Matrix::zeros(n, map.n_s()),
  };
  for (std::size_t i = 0; i < n; ++i) out.d_d[i] = zt_hat[i] * zs_hat[i];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < map.n_t(); ++j) out.d_pt(i, j) = d_zs_hat[i] * f.z_t[j];
    for (std::size_t j = 0; j < map.n_s(); ++j) out.d_ps(i, j) = d_zt_hat[i] * f.z_s[j];
  }
  return out;
}

SubspaceMap retract(const SubspaceMap& map) {
  return SubspaceMap{qr_orthonormalize(map.p_t), qr_orthonormalize(map.p_s), map.d};
}

SubspaceMap init_subspace(std::size_t n, std::size_t n_t, std::size_t n_s, Rng& rng) {
  if (n == 0 || n_t == 0 || n_s == 0 || n < n_t || n < n_s) {
    throw DimensionError("init_subspace: need n >= max(n_t, n_s) >= 1");
  }
  auto gaussian_matrix = [&rng](std::size_t r, std::size_t c) {
    Matrix m = Matrix::zeros(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.gaussian();
    }
    return m;
  };
  Matrix p_t = qr_orthonormalize(gaussian_matrix(n, n_t));
  Matrix p_s = qr_orthonormalize(gaussian_matrix(n, n_s));
  return SubspaceMap{std::move(p_t), std::move(p_s), std::vector<double>(n, 1.0)};
}

}  // namespace mokd
