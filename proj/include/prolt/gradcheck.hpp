#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prolt {

struct GradcheckOptions {
  std::size_t instances = 20;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-5;
  std::size_t width = 16;
};

struct GradcheckCase {
  std::string name;       // "loss_ic" or "loss_cls eta=<value>"
  std::size_t instance = 0;
  double max_rel_error = 0.0;  // worst parameter tensor
  bool passed = false;
};

// Compares backpropagated gradients with central finite differences on small
// random classifiers. The relative error of a tensor is
// |g_analytic - g_numeric| / max(|g_analytic| + |g_numeric|, 1e-12) in the L2 norm.
std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& options);

}  // namespace prolt
