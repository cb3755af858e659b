#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace soupforge {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  // Fault-injection hook: flips the sign of one analytic gradient entry, so
  // the gradient check must fail. Exercises the failure path end to end.
  bool corrupt_grad = false;
};

const std::vector<std::string>& verify_property_names();

// Self-contained invariant battery; builds its own small pool in a
// temporary directory and removes it afterwards.
std::vector<PropertyResult> run_verification(const VerifyOptions& options);

}  // namespace soupforge
