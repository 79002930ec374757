#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace prolt {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moments over a fixed list of parameter blocks.
class Adam {
 public:
  Adam(AdamConfig config, std::vector<std::size_t> block_sizes);

  // Throws NumericalError (without touching any parameter) if a gradient is not finite.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace prolt
