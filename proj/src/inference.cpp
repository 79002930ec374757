#include "prolt/inference.hpp"

#include "prolt/classifier.hpp"
#include "prolt/errors.hpp"
#include "prolt/metrics.hpp"
#include "prolt/priors.hpp"
#include "prolt/softmax.hpp"

namespace prolt {

Matrix adjusted_scores(const Matrix& composition_logits, const Matrix& state_posteriors,
                       const Matrix& object_posteriors, std::span<const double> k, const CompositionSpace& space,
                       double lambda, double eta) {
  if (composition_logits.cols() != space.size() || composition_logits.rows() != state_posteriors.rows() ||
      composition_logits.rows() != object_posteriors.rows()) {
    throw ShapeError("adjusted_scores: logits and posteriors do not line up");
  }
  Matrix out(composition_logits.rows(), composition_logits.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto k_hat = instance_k_hat(state_posteriors.row(i), object_posteriors.row(i), space);
    const auto prior = build_inference_prior(k, k_hat, lambda, eta, space);
    const auto r = infer(composition_logits.row(i), prior);
    std::copy(r.scores.begin(), r.scores.end(), out.row(i).begin());
  }
  return out;
}

Matrix attribute_product_scores(const Matrix& state_posteriors, const Matrix& object_posteriors,
                                const CompositionSpace& space) {
  Matrix out(state_posteriors.rows(), space.size());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t y = 0; y < space.size(); ++y) {
      const auto& p = space.pair(y);
      out(i, y) = state_posteriors(i, p.state) * object_posteriors(i, p.object);
    }
  }
  return out;
}

Matrix score(const Model& model, const Matrix& features, const SemanticTable& semantics,
             const CompositionSpace& space, const InferenceConfig& cfg) {
  if (model.space_hash != space.hash()) {
    throw ValidationError("model was trained on a different composition space");
  }
  const Matrix comp_sem = semantics.compositions(space);
  const Matrix cy = model.composition_clf.logits(features, comp_sem);
  const bool needs_attributes =
      cfg.mode == ScoreMode::ensemble ||
      (cfg.use_prior && cfg.eta != 0.0 && model.prior_mode != PriorMode::none);
  if (!needs_attributes) return cy;

  const Matrix ps = softmax_rows(model.state_clf.logits(features, semantics.states));
  const Matrix po = softmax_rows(model.object_clf.logits(features, semantics.objects));
  if (cfg.mode == ScoreMode::ensemble) {
    return ensemble_posterior(softmax_rows(cy), ps, po, EnsembleConfig{cfg.delta}, space);
  }
  return adjusted_scores(cy, ps, po, model.prior.k, space, cfg.lambda, cfg.eta);
}

}  // namespace prolt
