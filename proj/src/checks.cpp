#include "mokd/checks.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mokd/kd_losses.hpp"
#include "mokd/subspace.hpp"
#include "mokd/toy_tasks.hpp"
#include "mokd/trainer.hpp"
#include "mokd/weight_controller.hpp"

namespace mokd {

namespace {

struct Recorder {
  SuiteResult result;

  explicit Recorder(std::string name) { result.name = std::move(name); }

  void check(bool ok, const std::function<std::string()>& describe) {
    result.cases += 1;
    if (!ok) {
      result.failures += 1;
      if (result.first_counterexample.empty()) result.first_counterexample = describe();
    }
  }
};

std::string gram_str(const GramMatrix2& g) {
  std::ostringstream s;
  s << "{\"g11\": " << g.g11 << ", \"g22\": " << g.g22 << ", \"g12\": " << g.g12 << "}";
  return s.str();
}

GramMatrix2 apply_tweak(const CheckHooks& hooks, const GramMatrix2& g) {
  return hooks.gram_tweak ? hooks.gram_tweak(g) : g;
}

// Any 2x2 Gram with g11,g22 > 0 and |corr| < 1 is realized by a planar pair.
std::pair<Vector, Vector> realize_gram(const GramMatrix2& g) {
  const double n1 = std::sqrt(g.g11);
  const double x2 = g.g12 / n1;
  const double y2 = std::sqrt(std::max(g.g22 - x2 * x2, 0.0));
  return {Vector{n1, 0.0}, Vector{x2, y2}};
}

GramMatrix2 random_gram(Rng& rng) {
  const double g11 = std::pow(10.0, rng.uniform(-3.0, 3.0));
  const double g22 = std::pow(10.0, rng.uniform(-3.0, 3.0));
  const double corr = rng.uniform(-1.0, 1.0);
  return GramMatrix2{g11, g22, corr * std::sqrt(g11 * g22)};
}

std::pair<Vector, Vector> random_pair(Rng& rng, std::size_t dim) {
  Vector a = Vector::zeros(dim);
  Vector b = Vector::zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    a[i] = rng.gaussian();
    b[i] = rng.gaussian();
  }
  return {std::move(a), std::move(b)};
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

// det(G)/|g1-g2|^2 computed without the cancellation-prone g11 g22 - g12^2
// subtraction: project g2 off g1 and use det = g11 |g2_perp|^2.
double contribution_value(const Vector& g1, const Vector& g2) {
  const double g11 = dot(g1, g1);
  const double g12 = dot(g1, g2);
  Vector perp = g2;
  axpy(-g12 / g11, g1, perp);
  const double r = dot(g1, perp) / g11;  // re-orthogonalize once
  axpy(-r, g1, perp);
  const double d = dot(sub(g1, g2), sub(g1, g2));
  return g11 * dot(perp, perp) / d;
}

SuiteResult suite_closed_form_vs_oracle(const CheckHooks& hooks) {
  Recorder rec("closed-form-vs-oracle");
  Rng rng(20240301);
  for (int i = 0; i < 1000; ++i) {
    const GramMatrix2 g = apply_tweak(hooks, random_gram(rng));
    auto [v1, v2] = realize_gram(g);
    const SimplexWeights cf = solve_closed_form(g);
    const SimplexWeights oracle = solve_simplex_qp(TaskJacobian({v1, v2}), 1e-10);
    const double f_cf = dual_objective(g, cf);
    const double f_or = dual_objective(g, oracle);
    rec.check(rel_diff(f_cf, f_or) <= 1e-8, [&] {
      std::ostringstream s;
      s << "{\"gram\": " << gram_str(g) << ", \"f_closed\": " << f_cf
        << ", \"f_oracle\": " << f_or << "}";
      return s.str();
    });
  }
  return rec.result;
}

SuiteResult suite_equal_contribution(const CheckHooks& hooks) {
  Recorder rec("equal-contribution");
  Rng rng(20240302);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 63;
    auto [g1, g2] = random_pair(rng, dim);
    const GramMatrix2 g = apply_tweak(hooks, gram2(g1, g2));
    const double den = g.g11 + g.g22 - 2.0 * g.g12;
    if (den <= gram2_denominator_epsilon(g)) continue;
    const double raw_pi1 = (g.g22 - g.g12) / den;
    if (raw_pi1 <= 0.0 || raw_pi1 >= 1.0) continue;  // interior solutions only
    const SimplexWeights pi = solve_closed_form(g);
    const Vector gstar = combine(TaskJacobian({g1, g2}), pi);
    const double ip1 = dot(gstar, g1);
    const double ip2 = dot(gstar, g2);
    const double scale = std::max(g.g11, g.g22);
    const double expected = contribution_value(g1, g2);
    const bool ok = std::abs(ip1 - ip2) <= 1e-9 * scale && rel_diff(ip1, expected) <= 1e-9 &&
                    rel_diff(ip2, expected) <= 1e-9;
    rec.check(ok, [&] {
      std::ostringstream s;
      s << "{\"gram\": " << gram_str(g) << ", \"ip1\": " << ip1 << ", \"ip2\": " << ip2
        << ", \"expected\": " << expected << "}";
      return s.str();
    });
  }
  return rec.result;
}

SuiteResult suite_alignment(const CheckHooks& hooks) {
  Recorder rec("alignment");
  Rng rng(20240303);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 63;
    auto [g1, g2] = random_pair(rng, dim);
    const GramMatrix2 g = apply_tweak(hooks, gram2(g1, g2));
    const SimplexWeights pi = solve_closed_form(g);
    const Vector gstar = combine(TaskJacobian({g1, g2}), pi);
    const double scale = std::max(g.g11, g.g22);
    const bool ok = dot(gstar, g1) >= -1e-12 * scale && dot(gstar, g2) >= -1e-12 * scale;
    rec.check(ok, [&] {
      std::ostringstream s;
      s << "{\"gram\": " << gram_str(g) << ", \"ip1\": " << dot(gstar, g1)
        << ", \"ip2\": " << dot(gstar, g2) << "}";
      return s.str();
    });
  }
  return rec.result;
}

SuiteResult suite_norm_bounds(const CheckHooks& hooks) {
  Recorder rec("norm-bounds");
  Rng rng(20240304);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 63;
    auto [g1, g2] = random_pair(rng, dim);
    const GramMatrix2 g = apply_tweak(hooks, gram2(g1, g2));
    const SimplexWeights pi = solve_closed_form(g);
    const double gs = norm(combine(TaskJacobian({g1, g2}), pi));
    const double n1 = norm(g1);
    const double n2 = norm(g2);
    bool ok = true;
    if (std::abs(n1 - n2) > 1e-6) ok = ok && gs <= n1 * n2 / std::abs(n1 - n2) + 1e-9;
    if (g.g12 >= 0.0) ok = ok && gs >= std::min(n1, n2) / std::sqrt(2.0) - 1e-9;
    rec.check(ok, [&] {
      std::ostringstream s;
      s << "{\"gram\": " << gram_str(g) << ", \"gstar_norm\": " << gs << "}";
      return s.str();
    });
  }
  return rec.result;
}

SuiteResult suite_norm_identity(const CheckHooks& hooks) {
  Recorder rec("norm-identity");
  Rng rng(20240305);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 63;
    auto [g1, g2] = random_pair(rng, dim);
    const GramMatrix2 g = apply_tweak(hooks, gram2(g1, g2));
    const double den = g.g11 + g.g22 - 2.0 * g.g12;
    if (den <= gram2_denominator_epsilon(g)) continue;
    const double raw_pi1 = (g.g22 - g.g12) / den;
    if (raw_pi1 <= 0.0 || raw_pi1 >= 1.0) continue;
    const SimplexWeights pi = solve_closed_form(g);
    const Vector gstar = combine(TaskJacobian({g1, g2}), pi);
    const double lhs = dot(gstar, gstar);
    const double rhs = contribution_value(g1, g2);
    rec.check(rel_diff(lhs, rhs) <= 1e-9, [&] {
      std::ostringstream s;
      s << "{\"gram\": " << gram_str(g) << ", \"norm_sq\": " << lhs << ", \"identity\": " << rhs
        << "}";
      return s.str();
    });
  }
  return rec.result;
}

SuiteResult suite_softmax(const CheckHooks&) {
  Recorder rec("softmax-simplex");
  Rng rng(20240306);
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 7;
    Vector v = Vector::zeros(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = rng.uniform(-50.0, 50.0);
    const Vector s = softmax(v);
    double sum = 0.0;
    for (std::size_t j = 0; j < dim; ++j) sum += s[j];
    Vector shifted = v;
    const double c = rng.uniform(-100.0, 100.0);
    for (std::size_t j = 0; j < dim; ++j) shifted[j] += c;
    const Vector s2 = softmax(shifted);
    double max_shift = 0.0;
    for (std::size_t j = 0; j < dim; ++j) max_shift = std::max(max_shift, std::abs(s[j] - s2[j]));
    rec.check(std::abs(sum - 1.0) <= 1e-12 && max_shift <= 1e-12, [&] {
      std::ostringstream o;
      o << "{\"sum\": " << sum << ", \"shift_defect\": " << max_shift << "}";
      return o.str();
    });
  }
  return rec.result;
}

SuiteResult suite_qr(const CheckHooks&) {
  Recorder rec("qr-orthonormality");
  Rng rng(20240307);
  for (int i = 0; i < 200; ++i) {
    const std::size_t rows = 3 + rng.next_u64() % 14;
    const std::size_t cols = 1 + rng.next_u64() % rows;
    Matrix m = Matrix::zeros(rows, cols);
    for (double& x : m.values()) x = rng.gaussian();
    const Matrix q = qr_orthonormalize(m);
    double defect = 0.0;
    for (std::size_t a = 0; a < cols; ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        double s = 0.0;
        for (std::size_t t = 0; t < rows; ++t) s += q(t, a) * q(t, b);
        defect = std::max(defect, std::abs(s - (a == b ? 1.0 : 0.0)));
      }
    }
    const Matrix q2 = qr_orthonormalize(q);
    double idem = 0.0;
    for (std::size_t t = 0; t < q.values().size(); ++t) {
      idem = std::max(idem, std::abs(q.values()[t] - q2.values()[t]));
    }
    rec.check(defect <= 1e-12 && idem <= 1e-12, [&] {
      std::ostringstream o;
      o << "{\"rows\": " << rows << ", \"cols\": " << cols << ", \"defect\": " << defect
        << ", \"idempotence_defect\": " << idem << "}";
      return o.str();
    });
  }
  return rec.result;
}

SuiteResult suite_fd_losses(const CheckHooks&) {
  Recorder rec("finite-difference-losses");
  Rng rng(20240308);
  const double step = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 3 + rng.next_u64() % 6;
    auto [s_logits, t_logits] = random_pair(rng, k);
    const double tau = rng.uniform(0.5, 4.0);

    const Vector g_kl = kl_distill_grad_student(s_logits, t_logits, tau);
    const Vector fd_kl = finite_difference_gradient(
        [&](const Vector& x) { return kl_distill(x, t_logits, tau); }, s_logits, step);
    bool ok = true;
    for (std::size_t j = 0; j < k; ++j) {
      ok = ok && std::abs(g_kl[j] - fd_kl[j]) <= 1e-6 * std::max(1.0, std::abs(fd_kl[j]));
    }

    const std::size_t label = rng.next_u64() % k;
    const Vector g_ce = cross_entropy_grad(s_logits, label);
    const Vector fd_ce = finite_difference_gradient(
        [&](const Vector& x) { return cross_entropy(x, label); }, s_logits, step);
    for (std::size_t j = 0; j < k; ++j) {
      ok = ok && std::abs(g_ce[j] - fd_ce[j]) <= 1e-6 * std::max(1.0, std::abs(fd_ce[j]));
    }

    const Vector g_l1 = normalized_l1_grad_a(s_logits, t_logits);
    const Vector fd_l1 = finite_difference_gradient(
        [&](const Vector& x) { return normalized_l1(x, t_logits); }, s_logits, step);
    for (std::size_t j = 0; j < k; ++j) {
      ok = ok && std::abs(g_l1[j] - fd_l1[j]) <= 1e-6 * std::max(1.0, std::abs(fd_l1[j]));
    }
    rec.check(ok, [&] { return std::string("{\"suite\": \"losses\", \"instance\": ") +
                               std::to_string(i) + "}"; });
  }
  return rec.result;
}

SuiteResult suite_fd_subspace(const CheckHooks&) {
  Recorder rec("finite-difference-subspace");
  Rng rng(20240309);
  const double step = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 4 + rng.next_u64() % 5;
    const std::size_t nt = 2 + rng.next_u64() % (n - 1);
    const std::size_t ns = 2 + rng.next_u64() % (n - 1);
    Rng sub = rng.fork(1000 + static_cast<std::uint64_t>(i));
    SubspaceMap map = init_subspace(n, nt, ns, sub);
    for (double& x : map.d) x = sub.uniform(-2.0, 2.0);
    auto [zt, zs] = random_pair(sub, std::max(nt, ns));
    Vector z_t = Vector::zeros(nt);
    Vector z_s = Vector::zeros(ns);
    for (std::size_t j = 0; j < nt; ++j) z_t[j] = zt[j];
    for (std::size_t j = 0; j < ns; ++j) z_s[j] = zs[j];
    const FeaturePair f{z_t, z_s};

    const SimilarityGrads sg = similarity_grads(map, f);
    bool ok = true;
    const Vector fd_zs = finite_difference_gradient(
        [&](const Vector& x) { return similarity(map, FeaturePair{z_t, x}); }, z_s, step);
    for (std::size_t j = 0; j < ns; ++j) {
      ok = ok && std::abs(sg.d_zs[j] - fd_zs[j]) <= 1e-6 * std::max(1.0, std::abs(fd_zs[j]));
    }
    Vector dvec = Vector(map.d);
    const Vector fd_d = finite_difference_gradient(
        [&](const Vector& x) {
          SubspaceMap m2 = map;
          m2.d = x.values();
          return similarity(m2, f);
        },
        dvec, step);
    for (std::size_t j = 0; j < n; ++j) {
      ok = ok && std::abs(sg.d_d[j] - fd_d[j]) <= 1e-6 * std::max(1.0, std::abs(fd_d[j]));
    }
    rec.check(ok, [&] { return std::string("{\"suite\": \"subspace\", \"instance\": ") +
                               std::to_string(i) + "}"; });
  }
  return rec.result;
}

SuiteResult suite_fd_quadratic(const CheckHooks&) {
  Recorder rec("finite-difference-quadratic");
  Rng rng(20240310);
  for (int i = 0; i < 100; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 7;
    const QuadraticPair q = make_random_quadratic_pair(rng.next_u64(), dim);
    Vector theta = Vector::zeros(dim);
    for (std::size_t j = 0; j < dim; ++j) theta[j] = rng.gaussian();
    const QuadEval e = quad_losses(q, theta);
    const Vector fd1 = finite_difference_gradient(
        [&](const Vector& x) { return quad_losses(q, x).losses[0]; }, theta, 1e-5);
    const Vector fd2 = finite_difference_gradient(
        [&](const Vector& x) { return quad_losses(q, x).losses[1]; }, theta, 1e-5);
    bool ok = true;
    for (std::size_t j = 0; j < dim; ++j) {
      ok = ok && std::abs(e.g1[j] - fd1[j]) <= 1e-8 * std::max(1.0, std::abs(fd1[j]));
      ok = ok && std::abs(e.g2[j] - fd2[j]) <= 1e-8 * std::max(1.0, std::abs(fd2[j]));
    }
    rec.check(ok, [&] { return std::string("{\"suite\": \"quadratic\", \"instance\": ") +
                               std::to_string(i) + "}"; });
  }
  return rec.result;
}

SuiteResult suite_fd_mlp(const CheckHooks&) {
  Recorder rec("finite-difference-mlp");
  // Central differences are invalid at rectifier kinks; inputs whose
  // pre-activations land near zero are redrawn deterministically.
  auto min_preactivation = [](const MlpParams& p, const Vector& x) {
    double m = std::numeric_limits<double>::infinity();
    Vector z1 = matvec(p.w1, x);
    for (std::size_t i = 0; i < z1.size(); ++i) {
      z1[i] += p.b1[i];
      m = std::min(m, std::abs(z1[i]));
    }
    Vector a1 = z1;
    for (std::size_t i = 0; i < a1.size(); ++i) a1[i] = std::max(a1[i], 0.0);
    Vector z2 = matvec(p.w2, a1);
    for (std::size_t i = 0; i < z2.size(); ++i) m = std::min(m, std::abs(z2[i] + p.b2[i]));
    return m;
  };
  Rng rng(20240311);
  for (int i = 0; i < 100; ++i) {
    Rng sub = rng.fork(2000 + static_cast<std::uint64_t>(i));
    MlpParams p = make_mlp(sub, 4, 6, 5, 3);
    Vector x = Vector::zeros(4);
    do {
      for (std::size_t j = 0; j < 4; ++j) x[j] = sub.gaussian();
    } while (min_preactivation(p, x) < 1e-3);
    const std::size_t label = sub.next_u64() % 3;

    auto loss_of_params = [&](const Vector& flat) {
      MlpParams probe = p;
      mlp_unflatten_from(probe, flat.data());
      const MlpOutput out = mlp_forward(probe, x);
      // Scalar touching both heads so features get nonzero upstream.
      double feat = 0.0;
      for (std::size_t t = 0; t < out.features.size(); ++t) feat += out.features[t] * out.features[t];
      return cross_entropy(out.logits, label) + 0.1 * feat;
    };

    const MlpOutput out = mlp_forward(p, x);
    MlpUpstream up{cross_entropy_grad(out.logits, label), scaled(out.features, 0.2)};
    const MlpParams g = mlp_backward(p, x, up);

    std::vector<double> flat(mlp_param_count(p));
    mlp_flatten_into(p, flat.data());
    const Vector fd = finite_difference_gradient(loss_of_params, Vector(flat), 1e-5);
    std::vector<double> gflat(mlp_param_count(p));
    mlp_flatten_into(g, gflat.data());
    bool ok = true;
    for (std::size_t j = 0; j < gflat.size(); ++j) {
      ok = ok && std::abs(gflat[j] - fd[j]) <= 1e-6 * std::max(1.0, std::abs(fd[j]));
    }
    rec.check(ok, [&] { return std::string("{\"suite\": \"mlp\", \"instance\": ") +
                               std::to_string(i) + "}"; });
  }
  return rec.result;
}

SuiteResult suite_determinism(const CheckHooks&) {
  Recorder rec("determinism");
  const BlobDataset a = make_blobs(99, 200, 4, 4);
  const BlobDataset b = make_blobs(99, 200, 4, 4);
  rec.check(a.inputs.values() == b.inputs.values() && a.labels == b.labels,
            [] { return std::string("{\"case\": \"blob dataset bytes differ\"}"); });

  TrainConfig cfg;
  cfg.task = TaskKind::two_quadratic;
  cfg.controller.mode = ControllerMode::exact;
  cfg.eta_theta = 1e-2;
  cfg.steps = 50;
  cfg.seed = 7;
  cfg.quad.dim = 6;
  cfg.quad.pareto_samples = 101;
  std::vector<TraceRow> t1;
  std::vector<TraceRow> t2;
  run_experiment(cfg, &t1);
  run_experiment(cfg, &t2);
  rec.check(trace_csv(t1, 2) == trace_csv(t2, 2),
            [] { return std::string("{\"case\": \"quadratic trace bytes differ\"}"); });
  return rec.result;
}

}  // namespace

std::vector<SuiteResult> run_all_checks(const CheckHooks& hooks) {
  return {
      suite_closed_form_vs_oracle(hooks),
      suite_equal_contribution(hooks),
      suite_alignment(hooks),
      suite_norm_bounds(hooks),
      suite_norm_identity(hooks),
      suite_softmax(hooks),
      suite_qr(hooks),
      suite_fd_losses(hooks),
      suite_fd_subspace(hooks),
      suite_fd_quadratic(hooks),
      suite_fd_mlp(hooks),
      suite_determinism(hooks),
  };
}

}  // namespace mokd
