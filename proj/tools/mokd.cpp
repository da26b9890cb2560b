#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "mokd/checks.hpp"
#include "mokd/config.hpp"
#include "mokd/kd_losses.hpp"
#include "mokd/moo_solver.hpp"
#include "mokd/trainer.hpp"
#include "mokd/weight_controller.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitInputError = 2;
constexpr int kExitRuntimeError = 3;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct SolveReport {
  mokd::GramMatrix2 gram;
  std::optional<std::pair<double, double>> raw_pi;
  mokd::SimplexWeights pi{std::vector<double>{0.5, 0.5}};
  double gstar_norm = 0.0;
  double conflict = 0.0;
  std::optional<double> dominance_log10;
  std::optional<double> equal_contribution;
};

SolveReport solve_pair(const mokd::Vector& g1_in, const mokd::Vector& g2_in,
                       const std::optional<std::pair<double, double>>& losses) {
  mokd::Vector g1 = g1_in;
  mokd::Vector g2 = g2_in;
  SolveReport rep;
  rep.conflict = mokd::conflict_score(g1, g2);
  if (mokd::norm(g2) > 0.0) rep.dominance_log10 = mokd::dominance_score(g1, g2);
  if (losses) {
    g1 = mokd::log_gradient(g1, losses->first);
    g2 = mokd::log_gradient(g2, losses->second);
  }
  rep.gram = mokd::gram2(g1, g2);
  const double den = rep.gram.g11 + rep.gram.g22 - 2.0 * rep.gram.g12;
  if (den > mokd::gram2_denominator_epsilon(rep.gram)) {
    rep.raw_pi = mokd::solve_closed_form_raw(rep.gram);
    rep.equal_contribution =
        (rep.gram.g11 * rep.gram.g22 - rep.gram.g12 * rep.gram.g12) / den;
  }
  rep.pi = mokd::solve_closed_form(rep.gram);
  rep.gstar_norm = mokd::norm(mokd::combine(mokd::TaskJacobian({g1, g2}), rep.pi));
  return rep;
}

void print_solve_text(const SolveReport& r) {
  std::cout << "gram: g11=" << fmt17(r.gram.g11) << " g12=" << fmt17(r.gram.g12)
            << " g22=" << fmt17(r.gram.g22) << "\n";
  if (r.raw_pi) {
    std::cout << "raw_pi: (" << fmt17(r.raw_pi->first) << ", " << fmt17(r.raw_pi->second)
              << ")\n";
  } else {
    std::cout << "raw_pi: degenerate denominator\n";
  }
  std::cout << "pi: (" << fmt17(r.pi[0]) << ", " << fmt17(r.pi[1]) << ")\n";
  std::cout << "gstar_norm: " << fmt17(r.gstar_norm) << "\n";
  std::cout << "conflict: " << fmt17(r.conflict) << "\n";
  if (r.dominance_log10) {
    std::cout << "dominance_log10: " << fmt17(*r.dominance_log10) << "\n";
  } else {
    std::cout << "dominance_log10: undefined (zero task gradient)\n";
  }
  if (r.equal_contribution) {
    std::cout << "equal_contribution: " << fmt17(*r.equal_contribution) << "\n";
  } else {
    std::cout << "equal_contribution: undefined (degenerate denominator)\n";
  }
}

void print_solve_json(const SolveReport& r) {
  nlohmann::json j;
  j["g11"] = r.gram.g11;
  j["g12"] = r.gram.g12;
  j["g22"] = r.gram.g22;
  if (r.raw_pi) {
    j["raw_pi"] = {r.raw_pi->first, r.raw_pi->second};
  } else {
    j["raw_pi"] = nullptr;
  }
  j["pi"] = {r.pi[0], r.pi[1]};
  j["gstar_norm"] = r.gstar_norm;
  j["conflict"] = r.conflict;
  if (r.dominance_log10) {
    j["dominance_log10"] = *r.dominance_log10;
  } else {
    j["dominance_log10"] = nullptr;
  }
  if (r.equal_contribution) {
    j["equal_contribution"] = *r.equal_contribution;
  } else {
    j["equal_contribution"] = nullptr;
  }
  std::cout << j.dump(2) << "\n";
}

int cmd_solve(const std::string& g1_path, const std::string& g2_path,
              const std::string& losses_arg, bool as_json) {
  mokd::Vector g1{0.0};
  mokd::Vector g2{0.0};
  std::optional<std::pair<double, double>> losses;
  try {
    g1 = mokd::read_gradient_file(g1_path);
    g2 = mokd::read_gradient_file(g2_path);
    if (!losses_arg.empty()) {
      const auto comma = losses_arg.find(',');
      if (comma == std::string::npos) {
        throw mokd::ConfigError("--losses expects two comma-separated positive values");
      }
      const double a = std::stod(losses_arg.substr(0, comma));
      const double b = std::stod(losses_arg.substr(comma + 1));
      if (!(a > 0.0) || !(b > 0.0)) {
        throw mokd::ConfigError("--losses values must be positive");
      }
      losses = std::make_pair(a, b);
    }
    if (g1.size() != g2.size()) {
      throw mokd::DimensionError("gradient files " + g1_path + " and " + g2_path +
                                 " have different lengths");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  try {
    const SolveReport rep = solve_pair(g1, g2, losses);
    if (as_json) {
      print_solve_json(rep);
    } else {
      print_solve_text(rep);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_train(const std::string& config_path) {
  mokd::TrainConfig cfg;
  try {
    cfg = mokd::load_train_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  try {
    const mokd::RunSummary s = mokd::run_experiment(cfg);
    std::cout << "steps: " << s.steps << "\n";
    std::cout << "final_losses:";
    for (double v : s.final_losses) std::cout << ' ' << fmt17(v);
    std::cout << "\nfinal_pi:";
    for (double v : s.final_pi) std::cout << ' ' << fmt17(v);
    std::cout << "\n";
    if (s.min_pareto_distance) {
      std::cout << "min_pareto_distance: " << fmt17(*s.min_pareto_distance) << "\n";
      std::cout << "final_pareto_distance: " << fmt17(*s.final_pareto_distance) << "\n";
    }
    std::cout << "per_task_grad_evals: " << s.counters.per_task_grad_evals << "\n";
    std::cout << "combined_grad_evals: " << s.counters.combined_grad_evals << "\n";
    std::cout << "loss_only_evals: " << s.counters.loss_only_evals << "\n";
    std::cout << "backward_passes: " << s.counters.backward_passes() << "\n";
    std::cout << "student_params: " << s.student_params << "\n";
    std::cout << "trace: " << cfg.trace_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_bench(long angles, long ratios, const std::string& out_path) {
  std::ostringstream out;
  out << "angle,ratio,conflict,dominance_log10,pi1,pi2,gstar_norm,fixed_opposes\n";
  for (long i = 0; i < angles; ++i) {
    const double angle =
        M_PI * static_cast<double>(i) / static_cast<double>(angles - 1);
    for (long j = 0; j < ratios; ++j) {
      const double ratio =
          std::pow(10.0, -3.0 + 6.0 * static_cast<double>(j) / static_cast<double>(ratios - 1));
      const mokd::Vector g1{ratio, 0.0};
      const mokd::Vector g2{std::cos(angle), std::sin(angle)};
      const mokd::GramMatrix2 gram = mokd::gram2(g1, g2);
      const mokd::SimplexWeights pi = mokd::solve_closed_form(gram);
      const mokd::Vector gstar = mokd::combine(mokd::TaskJacobian({g1, g2}), pi);
      const mokd::Vector gtot = mokd::combine_fixed(g1, g2, mokd::BaselineWeights{0.5, 0.5});
      const bool fixed_opposes =
          mokd::dot(gtot, g1) < 0.0 || mokd::dot(gtot, g2) < 0.0;
      out << fmt17(angle) << ',' << fmt17(ratio) << ',' << fmt17(mokd::dot(g1, g2)) << ','
          << fmt17(std::log10(ratio)) << ',' << fmt17(pi[0]) << ',' << fmt17(pi[1]) << ','
          << fmt17(mokd::norm(gstar)) << ',' << (fixed_opposes ? 1 : 0) << '\n';
    }
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f || !(f << out.str())) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_check() {
  const std::vector<mokd::SuiteResult> results = mokd::run_all_checks();
  bool all_ok = true;
  for (const mokd::SuiteResult& r : results) {
    std::cout << (r.passed() ? "PASS" : "FAIL") << ' ' << r.name << ": " << r.cases
              << " cases, " << r.failures << " failures\n";
    if (!r.passed()) {
      all_ok = false;
      std::cout << "  first counterexample: " << r.first_counterexample << "\n";
    }
  }
  return all_ok ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective knowledge-distillation optimizer"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve", "Solve the two-task weighting from gradient files");
  std::string g1_path;
  std::string g2_path;
  std::string losses_arg;
  bool as_json = false;
  solve->add_option("--g1", g1_path, "first gradient file")->required();
  solve->add_option("--g2", g2_path, "second gradient file")->required();
  solve->add_option("--losses", losses_arg, "two positive loss values a,b (log-transform)");
  solve->add_flag("--json", as_json, "emit a JSON object instead of text");

  auto* train = app.add_subcommand("train", "Run an experiment from a JSON config");
  std::string config_path;
  train->add_option("--config", config_path, "config file")->required();

  auto* bench = app.add_subcommand("bench", "Sweep synthetic gradient pairs to CSV");
  long angles = 0;
  long ratios = 0;
  std::string out_path;
  bench->add_option("--angles", angles, "angle grid size (>= 2)")->required();
  bench->add_option("--ratios", ratios, "ratio grid size (>= 2)")->required();
  bench->add_option("--out", out_path, "output CSV path")->required();

  app.add_subcommand("check", "Run the invariant self-check suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  if (app.got_subcommand("solve")) return cmd_solve(g1_path, g2_path, losses_arg, as_json);
  if (app.got_subcommand("train")) return cmd_train(config_path);
  if (app.got_subcommand("bench")) {
    if (angles < 2 || ratios < 2) {
      std::cerr << "error: --angles and --ratios must be >= 2\n";
      return kExitInputError;
    }
    return cmd_bench(angles, ratios, out_path);
  }
  return cmd_check();
}
