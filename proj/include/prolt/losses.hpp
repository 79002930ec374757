#pragma once

#include <span>

#include "prolt/matrix.hpp"
#include "prolt/priors.hpp"

namespace prolt {

struct LossResult {
  double loss = 0.0;  // batch mean
  Matrix grad;        // d loss / d logits
};

struct IndependentLoss {
  double loss = 0.0;
  Matrix state_grad;
  Matrix object_grad;
};

// Mean softmax cross-entropy.
LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

// Independent-classifier loss: CE over state logits plus CE over object logits.
IndependentLoss loss_ic(const Matrix& state_logits, const Matrix& object_logits,
                        std::span<const std::size_t> state_labels, std::span<const std::size_t> object_labels);

// Prior-adjusted composition loss
//   log[1 + sum_{y' != y} (k(y')/k(y))^eta exp(C_{y'} - C_y)]
// evaluated as cross-entropy on C + eta * log k. `k` holds one entry per
// logit column; a zero entry for a true label is floored with a diagnostic.
LossResult loss_cls(const Matrix& logits, std::span<const std::size_t> labels, std::span<const double> k,
                    double eta, double floor = kProbabilityFloor);

}  // namespace prolt
