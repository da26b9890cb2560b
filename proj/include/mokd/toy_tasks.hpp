#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mokd/numerics.hpp"
#include "mokd/weight_controller.hpp"

namespace mokd {

// Two positive quadratic objectives L_i(theta) = 1/2 (theta-c_i)^T A_i
// (theta-c_i) + b_i with SPD A_i. The Pareto set of the pair has a closed
// form, which makes it the reference workload for front-convergence checks.
struct QuadraticPair {
  Matrix a1;
  Matrix a2;
  Vector c1;
  Vector c2;
  double b1 = 1.0;
  double b2 = 1.0;
};

struct QuadEval {
  LossVector losses;
  Vector g1;
  Vector g2;
};

QuadEval quad_losses(const QuadraticPair& q, const Vector& theta);

// theta(w) = (w A1 + (1-w) A2)^{-1} (w A1 c1 + (1-w) A2 c2), the point where
// w g1 + (1-w) g2 = 0. The curve over w in [0,1] is the Pareto set.
Vector quad_pareto_point(const QuadraticPair& q, double w);

// min over a uniform w-grid (samples points, endpoints included) of
// |theta - theta(w)|.
double pareto_distance(const QuadraticPair& q, const Vector& theta, std::size_t samples);

// Seeded generic instance: eigenvalues in [1.5, 3.0], minimizers drawn at
// modest separation so front losses stay small.
QuadraticPair make_random_quadratic_pair(std::uint64_t seed, std::size_t dim);

// Conflict-engineered instance: shared SPD matrix, c1 = -c2 != 0, so the
// gradients at theta = 0 are exactly anti-parallel.
QuadraticPair make_conflict_quadratic_pair(std::uint64_t seed, std::size_t dim);

// Two-hidden-layer perceptron with rectified-linear activations
// (subgradient 0 at the kink). The penultimate activation vector doubles as
// the feature representation consumed by the subspace adapter.
struct MlpParams {
  Matrix w1;  // h1 x in
  Vector b1;
  Matrix w2;  // h2 x h1
  Vector b2;
  Matrix w3;  // out x h2
  Vector b3;

  std::size_t input_dim() const { return w1.cols(); }
  std::size_t output_dim() const { return w3.rows(); }
  std::size_t feature_dim() const { return w2.rows(); }
};

struct MlpOutput {
  Vector logits;
  Vector features;
};

struct MlpUpstream {
  Vector d_logits;
  Vector d_features;
};

MlpOutput mlp_forward(const MlpParams& p, const Vector& x);
// Exact reverse-mode parameter gradients of any scalar whose logits/features
// gradients are supplied; re-runs the forward pass internally.
MlpParams mlp_backward(const MlpParams& p, const Vector& x, const MlpUpstream& upstream);

MlpParams make_mlp(Rng& rng, std::size_t in, std::size_t h1, std::size_t h2, std::size_t out);
MlpParams mlp_zeros_like(const MlpParams& p);
std::size_t mlp_param_count(const MlpParams& p);
void mlp_flatten_into(const MlpParams& p, double* out);
void mlp_unflatten_from(MlpParams& p, const double* in);
void mlp_accumulate(MlpParams& acc, const MlpParams& g, double scale);

// k Gaussian clusters with seeded means and unit shared covariance;
// round-robin labels keep class counts balanced within 1 and the 80/20
// train/val split is by index stride.
struct BlobDataset {
  Matrix inputs;  // N x d
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  Matrix means;  // k x d
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
};

BlobDataset make_blobs(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k);

// Blob data augmented with a 2-d regression target: the offset of each point
// from its cluster mean in the first two input coordinates.
struct DetectionDataset {
  BlobDataset blobs;
  Matrix offsets;  // N x 2
};

DetectionDataset make_toy_detection(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k);

// Central finite differences, the shared independent oracle for every
// analytic gradient in the project.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double step);

// Desk-scale SGD pretraining of the frozen teacher on the ground-truth task.
MlpParams train_teacher_classifier(const BlobDataset& data, std::size_t hidden, Rng rng,
                                   int epochs, double lr, std::size_t batch_size);
MlpParams train_teacher_detector(const DetectionDataset& data, std::size_t hidden, Rng rng,
                                 int epochs, double lr, std::size_t batch_size);

}  // namespace mokd
