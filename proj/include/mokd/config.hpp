#pragma once

#include <string>

#include "mokd/numerics.hpp"
#include "mokd/trainer.hpp"

namespace mokd {

// Parses a run configuration from JSON text. Unknown keys are rejected at
// every nesting level and all numeric ranges are validated before anything
// runs; throws ConfigError with the offending key or value.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);

// Gradient file: UTF-8 text, first line an integer n, then n lines holding
// one decimal float each. Errors name the file and line.
Vector read_gradient_file(const std::string& path);

}  // namespace mokd
