#pragma once

#include <string>
#include <vector>

namespace faceerase::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant checks: warp identity and gradients, Gram symmetry and
/// PSD, zero losses on identical inputs, discriminator receptive field and
/// spectral norms, Poisson identity.
std::vector<CheckResult> run_selftest(unsigned seed = 0);

}  // namespace faceerase::cli
