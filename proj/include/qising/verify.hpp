#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace qising {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  /// Called after each check, e.g. to stream progress.
  std::function<void(const CheckResult&)> on_result;
};

/// Runs the theory oracles and every module invariant suite.
std::vector<CheckResult> run_verify(const VerifyOptions& options = {});

/// Names of the checks in execution order.
std::vector<std::string> verify_check_names();

/// Runs the suite, streaming one line per check to `log`. True when all pass.
bool cmd_verify(std::uint64_t seed, std::ostream& log);

}  // namespace qising
