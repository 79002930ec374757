#pragma once

#include <cstdint>
#include <span>

#include "prolt/matrix.hpp"
#include "prolt/model.hpp"
#include "prolt/space.hpp"

namespace prolt {

enum class ScoreMode : std::uint8_t {
  adjusted = 0,  // C_y(x) + eta * log p(y | y in Y^S or Y^U)
  ensemble = 1,  // delta p(y|x) + (1 - delta)[p(s|x) + p(o|x)]
};

struct InferenceConfig {
  ScoreMode mode = ScoreMode::adjusted;
  bool use_prior = true;  // false reproduces the "p = 0" ablation
  double eta = 1.0;
  double lambda = 10.0;
  double delta = 0.5;
};

// Adjusted scores for a batch: per sample, k_hat_x from the attribute
// posteriors, then the seen/unseen inference prior, then infer().
Matrix adjusted_scores(const Matrix& composition_logits, const Matrix& state_posteriors,
                       const Matrix& object_posteriors, std::span<const double> k, const CompositionSpace& space,
                       double lambda, double eta);

// p(s|x) * p(o|x) for every feasible pair; the stage-1 validation score.
Matrix attribute_product_scores(const Matrix& state_posteriors, const Matrix& object_posteriors,
                                const CompositionSpace& space);

// Scores every feasible pair for each feature row.
Matrix score(const Model& model, const Matrix& features, const SemanticTable& semantics,
             const CompositionSpace& space, const InferenceConfig& cfg);

}  // namespace prolt
