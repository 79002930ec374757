#pragma once

#include <vector>

#include "prolt/bundle.hpp"
#include "prolt/experiment.hpp"
#include "prolt/softmax.hpp"
#include "prolt/synthgen.hpp"

namespace fixture {

// Composition posteriors p(y|x) of a vanilla-trained model on held-out seen
// samples, fed through imbalance_report; returns Spearman rho between count
// share and mean true-class posterior.
struct ImbalanceResult {
  std::vector<prolt::ImbalanceRow> rows;
  double rho = 0.0;
};

inline ImbalanceResult imbalance(const prolt::FeatureBundle& bundle, const prolt::RunConfig& cfg) {
  using namespace prolt;
  const auto run = train_model(bundle, cfg);
  std::vector<std::size_t> rows;
  for (Split split : {Split::val, Split::test})
    for (std::size_t i : bundle.indices(split))
      if (bundle.space.is_seen(bundle.pair_of(i))) rows.push_back(i);
  Matrix x(rows.size(), bundle.dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t d = 0; d < bundle.dim; ++d) x(r, d) = bundle.features[rows[r] * bundle.dim + d];
  const Matrix post = softmax_rows(run.model.composition_clf.logits(x, bundle.semantics.compositions(bundle.space)));
  std::vector<std::size_t> classes;
  for (std::size_t y = 0; y < bundle.space.num_seen(); ++y) classes.push_back(y);
  ImbalanceResult out;
  out.rows = imbalance_report(bundle, post, rows, classes);
  std::vector<double> counts, means;
  for (const auto& r : out.rows) {
    counts.push_back(r.count_share);
    means.push_back(r.mean_posterior);
  }
  out.rho = spearman(counts, means);
  return out;
}

}  // namespace fixture
