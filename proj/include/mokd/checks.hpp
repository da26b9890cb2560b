#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mokd/moo_solver.hpp"

namespace mokd {

struct SuiteResult {
  std::string name;
  long cases = 0;
  long failures = 0;
  std::string first_counterexample;

  bool passed() const { return failures == 0; }
};

// Injection points for sabotage tests: the tweak is applied to every Gram
// matrix before it reaches the solver under check.
struct CheckHooks {
  std::function<GramMatrix2(const GramMatrix2&)> gram_tweak;
};

// Runs every property suite with fixed seeds; deterministic across
// invocations. Suites: solver-vs-oracle cross-check, the closed-form
// solution's contribution/alignment/norm properties, softmax and QR
// invariants, finite-difference gradient checks, determinism.
std::vector<SuiteResult> run_all_checks(const CheckHooks& hooks = {});

}  // namespace mokd
