#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prolt/classifier.hpp"
#include "prolt/matrix.hpp"
#include "prolt/space.hpp"

namespace prolt {

inline constexpr double kProbabilityFloor = 1e-12;

// How the composition prior combines the two attribute marginals before the
// masked softmax. `product` feeds p(s) p(o) straight into the softmax;
// `log_product` feeds log(p(s) p(o)), which makes k proportional to the product.
enum class KForm : std::uint8_t { product = 0, log_product = 1 };

// p(s), p(o) averaged over the seen training set, and the composition prior k
// over dense pair indices. All three sum to one.
struct AttributePriorTable {
  std::vector<double> state_prior;
  std::vector<double> object_prior;
  std::vector<double> k;
  std::size_t epoch = 0;  // stage-2 epoch at which the table was estimated

  friend bool operator==(const AttributePriorTable&, const AttributePriorTable&) = default;
};

// Masked softmax of sigma(s,o) p(s) p(o) over feasible pairs; infeasible pairs
// are left out of the partition sum, so they carry exactly zero mass.
std::vector<double> compute_k(std::span<const double> state_prior, std::span<const double> object_prior,
                              const CompositionSpace& space, KForm form = KForm::product);

// Column means of the posterior matrices, then compute_k.
AttributePriorTable attribute_prior_from_posteriors(const Matrix& state_posteriors,
                                                    const Matrix& object_posteriors,
                                                    const CompositionSpace& space, KForm form = KForm::product);

AttributePriorTable estimate_attribute_prior(const PrototypeClassifier& state_clf,
                                             const PrototypeClassifier& object_clf,
                                             const Matrix& train_features, const SemanticTable& semantics,
                                             const CompositionSpace& space, KForm form = KForm::product);

// Per-sample version of compute_k built from p(s|x) and p(o|x).
std::vector<double> instance_k_hat(std::span<const double> state_posterior,
                                   std::span<const double> object_posterior, const CompositionSpace& space);

// Train-split class frequencies over feasible pairs with add-one smoothing,
// used for the class-prior ablation. Unseen pairs get the smoothing mass only.
std::vector<double> class_frequency_prior(std::span<const std::size_t> train_pairs,
                                          const CompositionSpace& space);

std::vector<double> uniform_prior(const CompositionSpace& space);

// Dense vector over Y scattered onto the |S| x |O| grid (zeros off the mask).
std::vector<double> expand_to_grid(std::span<const double> dense, const CompositionSpace& space);

// Per-class log p(y | y in Y^S) for seen pairs and log p(y | y in Y^U) for
// unseen pairs, each branch renormalized over its own set.
struct InferencePrior {
  std::vector<double> log_prior;
  double lambda = 10.0;
  double eta = 1.0;
  double floor = kProbabilityFloor;
};

// Seen branch is proportional to k. Unseen branch is proportional to
// k + k_hat_x / (lambda k); lambda = +inf drops the importance-sampling term.
InferencePrior build_inference_prior(std::span<const double> k, std::span<const double> k_hat_x, double lambda,
                                     double eta, const CompositionSpace& space,
                                     double floor = kProbabilityFloor);

}  // namespace prolt
