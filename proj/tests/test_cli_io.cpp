#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "mokd/config.hpp"

using namespace mokd;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/mokd_test_") + name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  return path;
}

const char* kValidConfig = R"({
  "task": "two_quadratic",
  "controller": {"mode": "exact", "eta_pi": 0.025, "gamma": 1.0},
  "eta_theta": 0.01,
  "steps": 100,
  "seed": 42,
  "temperature": 1.0,
  "grouping": "two_task",
  "trace_path": "/tmp/mokd_test_trace.csv",
  "task_params": {"dim": 10, "pareto_samples": 501}
})";

}  // namespace

TEST_CASE("valid config parses with expected fields") {
  const TrainConfig cfg = parse_train_config(kValidConfig);
  CHECK(cfg.task == TaskKind::two_quadratic);
  CHECK(cfg.controller.mode == ControllerMode::exact);
  CHECK(cfg.controller.eta_pi == 0.025);
  CHECK(cfg.eta_theta == 0.01);
  CHECK(cfg.steps == 100);
  CHECK(cfg.seed == 42);
  CHECK(cfg.quad.dim == 10);
  CHECK(cfg.quad.pareto_samples == 501);
}

TEST_CASE("unknown keys are rejected at every level") {
  std::string bad = kValidConfig;
  bad.insert(bad.rfind('}'), R"(, "typo_key": 1)");
  CHECK_THROWS_WITH_AS(parse_train_config(bad), doctest::Contains("typo_key"), ConfigError);

  std::string bad_controller = R"({
    "task": "two_quadratic",
    "controller": {"mode": "exact", "oops": 3},
    "eta_theta": 0.01, "steps": 10, "seed": 1, "trace_path": "t.csv"
  })";
  CHECK_THROWS_WITH_AS(parse_train_config(bad_controller), doctest::Contains("oops"),
                       ConfigError);

  std::string bad_params = R"({
    "task": "blobs_kd",
    "controller": {"mode": "exact"},
    "eta_theta": 0.01, "steps": 10, "seed": 1, "trace_path": "t.csv",
    "task_params": {"n_points": 100, "weird": true}
  })";
  CHECK_THROWS_WITH_AS(parse_train_config(bad_params), doctest::Contains("weird"), ConfigError);
}

TEST_CASE("numeric ranges are validated before any run starts") {
  std::string neg_eta = kValidConfig;
  const auto pos = neg_eta.find("\"eta_theta\": 0.01");
  neg_eta.replace(pos, 17, "\"eta_theta\": -1");
  CHECK_THROWS_AS(parse_train_config(neg_eta), ConfigError);

  std::string zero_steps = kValidConfig;
  const auto pos2 = zero_steps.find("\"steps\": 100");
  zero_steps.replace(pos2, 12, "\"steps\": 0");
  CHECK_THROWS_AS(parse_train_config(zero_steps), ConfigError);
}

TEST_CASE("missing required keys and malformed JSON fail cleanly") {
  CHECK_THROWS_AS(parse_train_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"task": "two_quadratic"})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({
    "task": "nonsense",
    "controller": {"mode": "exact"},
    "eta_theta": 0.01, "steps": 10, "seed": 1, "trace_path": "t.csv"
  })"),
                  ConfigError);
}

TEST_CASE("controller modes and signals parse") {
  const TrainConfig amo = parse_train_config(R"({
    "task": "two_quadratic",
    "controller": {"mode": "amortized", "amortized_signal": "raw_log_loss"},
    "eta_theta": 0.01, "steps": 10, "seed": 1, "trace_path": "t.csv"
  })");
  CHECK(amo.controller.mode == ControllerMode::amortized);
  CHECK(amo.controller.amortized_signal == AmortizedSignal::raw_log_loss);

  const TrainConfig fix = parse_train_config(R"({
    "task": "two_quadratic",
    "controller": {"mode": "fixed", "fixed_alpha": [2.0, 0.5]},
    "eta_theta": 0.01, "steps": 10, "seed": 1, "trace_path": "t.csv"
  })");
  CHECK(fix.controller.mode == ControllerMode::fixed_weights);
  CHECK(fix.controller.fixed_alpha.alpha1 == 2.0);
  CHECK(fix.controller.fixed_alpha.alpha2 == 0.5);
}

TEST_CASE("gradient file round trip") {
  const std::string path = write_temp("grad_ok.txt", "3\n1.5\n-2.25\n0.125\n");
  const Vector v = read_gradient_file(path);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 1.5);
  CHECK(v[1] == -2.25);
  CHECK(v[2] == 0.125);
  std::remove(path.c_str());
}

TEST_CASE("gradient file errors name the file and line") {
  const std::string missing_header = write_temp("grad_bad1.txt", "abc\n1.0\n");
  CHECK_THROWS_WITH_AS(read_gradient_file(missing_header), doctest::Contains("line 1"),
                       ConfigError);

  const std::string short_file = write_temp("grad_bad2.txt", "3\n1.0\n2.0\n");
  CHECK_THROWS_WITH_AS(read_gradient_file(short_file), doctest::Contains("grad_bad2"),
                       ConfigError);

  const std::string bad_value = write_temp("grad_bad3.txt", "2\n1.0\nnope\n");
  CHECK_THROWS_WITH_AS(read_gradient_file(bad_value), doctest::Contains("line 3"), ConfigError);

  const std::string trailing = write_temp("grad_bad4.txt", "2\n1.0 extra\n2.0\n");
  CHECK_THROWS_AS(read_gradient_file(trailing), ConfigError);

  CHECK_THROWS_AS(read_gradient_file("/tmp/mokd_test_does_not_exist.txt"), ConfigError);
  std::remove(missing_header.c_str());
  std::remove(short_file.c_str());
  std::remove(bad_value.c_str());
  std::remove(trailing.c_str());
}

TEST_CASE("load_train_config reads from disk") {
  const std::string path = write_temp("config_ok.json", kValidConfig);
  const TrainConfig cfg = load_train_config(path);
  CHECK(cfg.steps == 100);
  CHECK_THROWS_AS(load_train_config("/tmp/mokd_missing_config.json"), ConfigError);
  std::remove(path.c_str());
}
