#include "mokd/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mokd {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " + where);
    }
  }
}

double get_number(const json& obj, const char* key, double fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(std::string("config: missing required key '") + key + "'");
    return fallback;
  }
  if (!obj[key].is_number()) {
    throw ConfigError(std::string("config: key '") + key + "' must be a number");
  }
  return obj[key].get<double>();
}

long get_integer(const json& obj, const char* key, long fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(std::string("config: missing required key '") + key + "'");
    return fallback;
  }
  if (!obj[key].is_number_integer()) {
    throw ConfigError(std::string("config: key '") + key + "' must be an integer");
  }
  return obj[key].get<long>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback,
                       bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(std::string("config: missing required key '") + key + "'");
    return fallback;
  }
  if (!obj[key].is_string()) {
    throw ConfigError(std::string("config: key '") + key + "' must be a string");
  }
  return obj[key].get<std::string>();
}

ControllerConfig parse_controller(const json& obj) {
  reject_unknown_keys(obj, "controller",
                      {"mode", "eta_pi", "gamma", "fixed_alpha", "amortized_signal"});
  ControllerConfig cc;
  const std::string mode = get_string(obj, "mode", "", true);
  if (mode == "exact") {
    cc.mode = ControllerMode::exact;
  } else if (mode == "amortized") {
    cc.mode = ControllerMode::amortized;
  } else if (mode == "fixed") {
    cc.mode = ControllerMode::fixed_weights;
  } else {
    throw ConfigError("config: controller.mode must be exact, amortized or fixed");
  }
  cc.eta_pi = get_number(obj, "eta_pi", cc.eta_pi);
  cc.gamma = get_number(obj, "gamma", cc.gamma);
  if (obj.contains("fixed_alpha")) {
    const json& fa = obj["fixed_alpha"];
    if (!fa.is_array() || fa.size() != 2 || !fa[0].is_number() || !fa[1].is_number()) {
      throw ConfigError("config: fixed_alpha must be an array of two numbers");
    }
    cc.fixed_alpha = BaselineWeights{fa[0].get<double>(), fa[1].get<double>()};
  }
  const std::string sig = get_string(obj, "amortized_signal", "improvement");
  if (sig == "improvement") {
    cc.amortized_signal = AmortizedSignal::improvement;
  } else if (sig == "raw_log_loss") {
    cc.amortized_signal = AmortizedSignal::raw_log_loss;
  } else {
    throw ConfigError("config: amortized_signal must be improvement or raw_log_loss");
  }
  return cc;
}

void parse_task_params(const json& obj, TrainConfig& cfg) {
  if (cfg.task == TaskKind::two_quadratic) {
    reject_unknown_keys(obj, "task_params",
                        {"dim", "conflict", "pareto_samples", "theta0_scale"});
    cfg.quad.dim = static_cast<std::size_t>(get_integer(obj, "dim", (long)cfg.quad.dim));
    if (obj.contains("conflict")) {
      if (!obj["conflict"].is_boolean()) throw ConfigError("config: conflict must be a boolean");
      cfg.quad.conflict = obj["conflict"].get<bool>();
    }
    cfg.quad.pareto_samples =
        static_cast<std::size_t>(get_integer(obj, "pareto_samples", (long)cfg.quad.pareto_samples));
    cfg.quad.theta0_scale = get_number(obj, "theta0_scale", cfg.quad.theta0_scale);
  } else {
    reject_unknown_keys(obj, "task_params",
                        {"n_points", "input_dim", "classes", "teacher_width", "student_width",
                         "batch_size", "teacher_epochs", "teacher_lr"});
    cfg.kd.n_points = static_cast<std::size_t>(get_integer(obj, "n_points", (long)cfg.kd.n_points));
    cfg.kd.input_dim =
        static_cast<std::size_t>(get_integer(obj, "input_dim", (long)cfg.kd.input_dim));
    cfg.kd.classes = static_cast<std::size_t>(get_integer(obj, "classes", (long)cfg.kd.classes));
    cfg.kd.teacher_width =
        static_cast<std::size_t>(get_integer(obj, "teacher_width", (long)cfg.kd.teacher_width));
    cfg.kd.student_width =
        static_cast<std::size_t>(get_integer(obj, "student_width", (long)cfg.kd.student_width));
    cfg.kd.batch_size =
        static_cast<std::size_t>(get_integer(obj, "batch_size", (long)cfg.kd.batch_size));
    cfg.kd.teacher_epochs = static_cast<int>(get_integer(obj, "teacher_epochs", cfg.kd.teacher_epochs));
    cfg.kd.teacher_lr = get_number(obj, "teacher_lr", cfg.kd.teacher_lr);
  }
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(root, "config",
                      {"task", "controller", "eta_theta", "steps", "seed", "subspace",
                       "temperature", "grouping", "trace_path", "task_params"});

  TrainConfig cfg;
  const std::string task = get_string(root, "task", "", true);
  if (task == "two_quadratic") {
    cfg.task = TaskKind::two_quadratic;
  } else if (task == "blobs_kd") {
    cfg.task = TaskKind::blobs_kd;
  } else if (task == "toy_detection") {
    cfg.task = TaskKind::toy_detection;
  } else {
    throw ConfigError("config: task must be two_quadratic, blobs_kd or toy_detection");
  }

  if (!root.contains("controller") || !root["controller"].is_object()) {
    throw ConfigError("config: missing required object 'controller'");
  }
  cfg.controller = parse_controller(root["controller"]);

  cfg.eta_theta = get_number(root, "eta_theta", 0.0, true);
  cfg.steps = get_integer(root, "steps", 0, true);
  const long seed = get_integer(root, "seed", 0, true);
  if (seed < 0) throw ConfigError("config: seed must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.temperature = get_number(root, "temperature", cfg.temperature);

  const std::string grouping = get_string(root, "grouping", "two_task");
  if (grouping == "two_task") {
    cfg.grouping = LossGrouping::two_task;
  } else if (grouping == "three_task") {
    cfg.grouping = LossGrouping::three_task;
  } else {
    throw ConfigError("config: grouping must be two_task or three_task");
  }

  cfg.trace_path = get_string(root, "trace_path", "", true);
  if (cfg.trace_path.empty()) throw ConfigError("config: trace_path must not be empty");

  if (root.contains("subspace")) {
    const json& sub = root["subspace"];
    if (!sub.is_object()) throw ConfigError("config: subspace must be an object");
    reject_unknown_keys(sub, "subspace", {"enabled", "n"});
    if (sub.contains("enabled")) {
      if (!sub["enabled"].is_boolean()) throw ConfigError("config: subspace.enabled must be a boolean");
      cfg.subspace.enabled = sub["enabled"].get<bool>();
    }
    cfg.subspace.n = static_cast<std::size_t>(get_integer(sub, "n", 0));
  }

  if (root.contains("task_params")) {
    if (!root["task_params"].is_object()) throw ConfigError("config: task_params must be an object");
    parse_task_params(root["task_params"], cfg);
  }

  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_train_config(buf.str());
}

Vector read_gradient_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("gradient file: cannot open " + path);
  auto fail = [&path](long line, const std::string& msg) {
    throw ConfigError("gradient file " + path + ", line " + std::to_string(line) + ": " + msg);
  };
  std::string line;
  long lineno = 0;
  if (!std::getline(f, line)) fail(1, "missing length header");
  lineno = 1;
  long n = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> n) || n < 1) fail(lineno, "header must be a positive integer");
    std::string rest;
    if (ss >> rest) fail(lineno, "trailing content after length");
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (!std::getline(f, line)) fail(lineno + 1, "expected " + std::to_string(n) + " values");
    ++lineno;
    std::istringstream ss(line);
    double v = 0.0;
    if (!(ss >> v)) fail(lineno, "not a number");
    std::string rest;
    if (ss >> rest) fail(lineno, "trailing content after value");
    values.push_back(v);
  }
  try {
    return Vector(std::move(values));
  } catch (const Error& e) {
    throw ConfigError("gradient file " + path + ": " + e.what());
  }
}

}  // namespace mokd
