#include "mokd/toy_tasks.hpp"

#include <algorithm>
#include <cmath>

#include "mokd/kd_losses.hpp"

namespace mokd {

QuadEval quad_losses(const QuadraticPair& q, const Vector& theta) {
  const std::size_t d = theta.size();
  if (q.a1.rows() != d || q.a2.rows() != d || q.c1.size() != d || q.c2.size() != d) {
    throw DimensionError("quad_losses: dimension mismatch");
  }
  const Vector r1 = sub(theta, q.c1);
  const Vector r2 = sub(theta, q.c2);
  const Vector g1 = matvec(q.a1, r1);
  const Vector g2 = matvec(q.a2, r2);
  const double l1 = 0.5 * dot(r1, g1) + q.b1;
  const double l2 = 0.5 * dot(r2, g2) + q.b2;
  return QuadEval{LossVector({l1, l2}), g1, g2};
}

Vector quad_pareto_point(const QuadraticPair& q, double w) {
  if (w < 0.0 || w > 1.0) throw DomainError("quad_pareto_point: w must lie in [0, 1]");
  const std::size_t d = q.c1.size();
  Matrix m = Matrix::zeros(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = w * q.a1(i, j) + (1.0 - w) * q.a2(i, j);
  }
  Vector rhs = matvec(q.a1, q.c1);
  const Vector rhs2 = matvec(q.a2, q.c2);
  for (std::size_t i = 0; i < d; ++i) rhs[i] = w * rhs[i] + (1.0 - w) * rhs2[i];
  return solve_spd(m, rhs);
}

double pareto_distance(const QuadraticPair& q, const Vector& theta, std::size_t samples) {
  if (samples < 2) throw DomainError("pareto_distance: need samples >= 2");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(samples - 1);
    best = std::min(best, norm(sub(theta, quad_pareto_point(q, w))));
  }
  return best;
}

namespace {

Matrix random_spd(Rng& rng, std::size_t dim, double lo, double hi) {
  Matrix g = Matrix::zeros(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) g(i, j) = rng.gaussian();
  }
  const Matrix q = qr_orthonormalize(g);
  std::vector<double> eig(dim);
  for (std::size_t i = 0; i < dim; ++i) eig[i] = rng.uniform(lo, hi);
  // A = Q diag(eig) Q^T
  Matrix a = Matrix::zeros(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < dim; ++t) s += q(i, t) * eig[t] * q(j, t);
      a(i, j) = s;
    }
  }
  // Exact symmetry keeps Cholesky and gradient identities tight.
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double s = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = s;
      a(j, i) = s;
    }
  }
  return a;
}

Vector random_vector(Rng& rng, std::size_t dim, double scale) {
  Vector v = Vector::zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.gaussian();
  return v;
}

}  // namespace

QuadraticPair make_random_quadratic_pair(std::uint64_t seed, std::size_t dim) {
  Rng rng = Rng(seed).fork(11);
  Matrix a1 = random_spd(rng, dim, 1.5, 3.0);
  Matrix a2 = random_spd(rng, dim, 1.5, 3.0);
  Vector c1 = random_vector(rng, dim, 0.3);
  Vector c2 = random_vector(rng, dim, 0.3);
  return QuadraticPair{std::move(a1), std::move(a2), std::move(c1), std::move(c2), 1.0, 1.0};
}

QuadraticPair make_conflict_quadratic_pair(std::uint64_t seed, std::size_t dim) {
  Rng rng = Rng(seed).fork(12);
  Matrix a = random_spd(rng, dim, 1.5, 3.0);
  Vector c1 = random_vector(rng, dim, 0.5);
  if (norm(c1) < 1e-6) c1[0] = 0.5;  // keep the minimizers apart
  Vector c2 = scaled(c1, -1.0);
  return QuadraticPair{a, a, std::move(c1), std::move(c2), 1.0, 1.0};
}

MlpOutput mlp_forward(const MlpParams& p, const Vector& x) {
  if (x.size() != p.input_dim()) throw DimensionError("mlp_forward: input width mismatch");
  Vector a1 = matvec(p.w1, x);
  for (std::size_t i = 0; i < a1.size(); ++i) a1[i] = std::max(a1[i] + p.b1[i], 0.0);
  Vector a2 = matvec(p.w2, a1);
  for (std::size_t i = 0; i < a2.size(); ++i) a2[i] = std::max(a2[i] + p.b2[i], 0.0);
  Vector logits = matvec(p.w3, a2);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += p.b3[i];
  return MlpOutput{std::move(logits), std::move(a2)};
}

MlpParams mlp_backward(const MlpParams& p, const Vector& x, const MlpUpstream& upstream) {
  if (x.size() != p.input_dim()) throw DimensionError("mlp_backward: input width mismatch");
  if (upstream.d_logits.size() != p.output_dim() || upstream.d_features.size() != p.feature_dim()) {
    throw DimensionError("mlp_backward: upstream shape mismatch");
  }
  // Forward, keeping pre-activations for the rectifier masks.
  Vector z1 = matvec(p.w1, x);
  for (std::size_t i = 0; i < z1.size(); ++i) z1[i] += p.b1[i];
  Vector a1 = z1;
  for (std::size_t i = 0; i < a1.size(); ++i) a1[i] = std::max(a1[i], 0.0);
  Vector z2 = matvec(p.w2, a1);
  for (std::size_t i = 0; i < z2.size(); ++i) z2[i] += p.b2[i];
  Vector a2 = z2;
  for (std::size_t i = 0; i < a2.size(); ++i) a2[i] = std::max(a2[i], 0.0);

  MlpParams g = mlp_zeros_like(p);
  const Vector& d3 = upstream.d_logits;
  for (std::size_t i = 0; i < p.w3.rows(); ++i) {
    for (std::size_t j = 0; j < p.w3.cols(); ++j) g.w3(i, j) = d3[i] * a2[j];
    g.b3[i] = d3[i];
  }
  Vector da2 = matvec_t(p.w3, d3);
  for (std::size_t i = 0; i < da2.size(); ++i) {
    da2[i] = (da2[i] + upstream.d_features[i]) * (z2[i] > 0.0 ? 1.0 : 0.0);
  }
  for (std::size_t i = 0; i < p.w2.rows(); ++i) {
    for (std::size_t j = 0; j < p.w2.cols(); ++j) g.w2(i, j) = da2[i] * a1[j];
    g.b2[i] = da2[i];
  }
  Vector da1 = matvec_t(p.w2, da2);
  for (std::size_t i = 0; i < da1.size(); ++i) da1[i] *= (z1[i] > 0.0 ? 1.0 : 0.0);
  for (std::size_t i = 0; i < p.w1.rows(); ++i) {
    for (std::size_t j = 0; j < p.w1.cols(); ++j) g.w1(i, j) = da1[i] * x[j];
    g.b1[i] = da1[i];
  }
  return g;
}

MlpParams make_mlp(Rng& rng, std::size_t in, std::size_t h1, std::size_t h2, std::size_t out) {
  auto he_matrix = [&rng](std::size_t r, std::size_t c) {
    const double scale = std::sqrt(2.0 / static_cast<double>(c));
    Matrix m = Matrix::zeros(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * rng.gaussian();
    }
    return m;
  };
  return MlpParams{he_matrix(h1, in),  Vector::zeros(h1), he_matrix(h2, h1),
                   Vector::zeros(h2),  he_matrix(out, h2), Vector::zeros(out)};
}

MlpParams mlp_zeros_like(const MlpParams& p) {
  return MlpParams{Matrix::zeros(p.w1.rows(), p.w1.cols()), Vector::zeros(p.b1.size()),
                   Matrix::zeros(p.w2.rows(), p.w2.cols()), Vector::zeros(p.b2.size()),
                   Matrix::zeros(p.w3.rows(), p.w3.cols()), Vector::zeros(p.b3.size())};
}

std::size_t mlp_param_count(const MlpParams& p) {
  return p.w1.values().size() + p.b1.size() + p.w2.values().size() + p.b2.size() +
         p.w3.values().size() + p.b3.size();
}

void mlp_flatten_into(const MlpParams& p, double* out) {
  auto put = [&out](const std::vector<double>& v) {
    out = std::copy(v.begin(), v.end(), out);
  };
  put(p.w1.values());
  put(p.b1.values());
  put(p.w2.values());
  put(p.b2.values());
  put(p.w3.values());
  put(p.b3.values());
}

void mlp_unflatten_from(MlpParams& p, const double* in) {
  auto take = [&in](std::vector<double>& v) {
    std::copy(in, in + v.size(), v.begin());
    in += v.size();
  };
  take(p.w1.values());
  take(p.b1.values());
  take(p.w2.values());
  take(p.b2.values());
  take(p.w3.values());
  take(p.b3.values());
}

void mlp_accumulate(MlpParams& acc, const MlpParams& g, double scale) {
  auto acc_vec = [scale](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  };
  acc_vec(acc.w1.values(), g.w1.values());
  acc_vec(acc.b1.values(), g.b1.values());
  acc_vec(acc.w2.values(), g.w2.values());
  acc_vec(acc.b2.values(), g.b2.values());
  acc_vec(acc.w3.values(), g.w3.values());
  acc_vec(acc.b3.values(), g.b3.values());
}

BlobDataset make_blobs(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k) {
  if (k < 2 || n < k || d < 2) throw DomainError("make_blobs: need N >= k >= 2 and d >= 2");
  Rng rng = Rng(seed).fork(21);
  Matrix means = Matrix::zeros(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j) means(i, j) = rng.uniform(-4.0, 4.0);
  }
  Matrix inputs = Matrix::zeros(n, d);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % k;
    labels[i] = label;
    for (std::size_t j = 0; j < d; ++j) inputs(i, j) = means(label, j) + rng.gaussian();
  }
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 5 == 4) {
      val_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  return BlobDataset{std::move(inputs), std::move(labels), k, std::move(means),
                     std::move(train_idx), std::move(val_idx)};
}

DetectionDataset make_toy_detection(std::uint64_t seed, std::size_t n, std::size_t d,
                                    std::size_t k) {
  BlobDataset blobs = make_blobs(seed, n, d, k);
  Matrix offsets = Matrix::zeros(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = blobs.labels[i];
    offsets(i, 0) = blobs.inputs(i, 0) - blobs.means(label, 0);
    offsets(i, 1) = blobs.inputs(i, 1) - blobs.means(label, 1);
  }
  return DetectionDataset{std::move(blobs), std::move(offsets)};
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double step) {
  Vector g = Vector::zeros(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = f(probe);
    probe[i] = orig - step;
    const double fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

namespace {

Vector dataset_row(const Matrix& m, std::size_t i) {
  Vector v = Vector::zeros(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) v[j] = m(i, j);
  return v;
}

template <typename UpstreamFn>
MlpParams sgd_train(const Matrix& inputs, const std::vector<std::size_t>& train_idx,
                    std::size_t hidden, std::size_t out_dim, Rng rng, int epochs, double lr,
                    std::size_t batch_size, UpstreamFn&& upstream_of) {
  MlpParams p = make_mlp(rng, inputs.cols(), hidden, hidden, out_dim);
  std::vector<std::size_t> order = train_idx;
  for (int e = 0; e < epochs; ++e) {
    // Seeded Fisher-Yates reshuffle per epoch.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, order.size());
      MlpParams grad = mlp_zeros_like(p);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      for (std::size_t t = start; t < stop; ++t) {
        const std::size_t idx = order[t];
        const Vector x = dataset_row(inputs, idx);
        const MlpOutput fwd = mlp_forward(p, x);
        MlpUpstream up{upstream_of(idx, fwd), Vector::zeros(p.feature_dim())};
        for (std::size_t i = 0; i < up.d_logits.size(); ++i) up.d_logits[i] *= inv_b;
        mlp_accumulate(grad, mlp_backward(p, x, up), 1.0);
      }
      mlp_accumulate(p, grad, -lr);
    }
  }
  return p;
}

}  // namespace

MlpParams train_teacher_classifier(const BlobDataset& data, std::size_t hidden, Rng rng,
                                   int epochs, double lr, std::size_t batch_size) {
  return sgd_train(data.inputs, data.train_idx, hidden, data.num_classes, rng, epochs, lr,
                   batch_size, [&data](std::size_t idx, const MlpOutput& fwd) {
                     return cross_entropy_grad(fwd.logits, data.labels[idx]);
                   });
}

MlpParams train_teacher_detector(const DetectionDataset& data, std::size_t hidden, Rng rng,
                                 int epochs, double lr, std::size_t batch_size) {
  const std::size_t k = data.blobs.num_classes;
  return sgd_train(data.blobs.inputs, data.blobs.train_idx, hidden, k + 2, rng, epochs, lr,
                   batch_size, [&data, k](std::size_t idx, const MlpOutput& fwd) {
                     // Class head gets the cross-entropy gradient, offset
                     // head the mean-absolute-error subgradient.
                     Vector class_logits = Vector::zeros(k);
                     for (std::size_t i = 0; i < k; ++i) class_logits[i] = fwd.logits[i];
                     const Vector ce = cross_entropy_grad(class_logits, data.blobs.labels[idx]);
                     Vector up = Vector::zeros(k + 2);
                     for (std::size_t i = 0; i < k; ++i) up[i] = ce[i];
                     for (std::size_t i = 0; i < 2; ++i) {
                       const double diff = fwd.logits[k + i] - data.offsets(idx, i);
                       up[k + i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * 0.5;
                     }
                     return up;
                   });
}

}  // namespace mokd
