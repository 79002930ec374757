#include "prolt/adam.hpp"

#include <cmath>
#include <string>

#include "prolt/errors.hpp"

namespace prolt {

Adam::Adam(AdamConfig config, std::vector<std::size_t> block_sizes) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ValidationError("Adam: learning rate must be positive");
  for (std::size_t n : block_sizes) {
    first_.emplace_back(n, 0.0);
    second_.emplace_back(n, 0.0);
  }
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    throw ShapeError("Adam::step: expected " + std::to_string(first_.size()) + " parameter blocks");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != first_[b].size() || grads[b].size() != first_[b].size()) {
      throw ShapeError("Adam::step: block " + std::to_string(b) + " has the wrong size");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) {
        throw NumericalError("Adam::step: non-finite gradient in block " + std::to_string(b) +
                             " at step " + std::to_string(steps_ + 1));
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = first_[b];
    auto& v = second_[b];
    auto p = params[b];
    auto g = grads[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace prolt
