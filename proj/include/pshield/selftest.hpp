#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pshield {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Randomized formula checks over the defense catalog: simplex closure for
// every defense, the exact beta=0 identity, the gamma=1 closed form, the
// detector passthrough/agreement regimes at two margins, and l1 monotonicity
// in beta at a fixed detector threshold. Deterministic per seed.
std::vector<CheckResult> run_formula_suite(std::uint64_t seed,
                                           std::size_t samples_per_defense);

}  // namespace pshield
