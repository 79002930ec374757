#include "prolt/priors.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"
#include "prolt/softmax.hpp"

namespace prolt {
namespace {

void check_marginals(std::span<const double> ps, std::span<const double> po, const CompositionSpace& space) {
  if (ps.size() != space.num_states() || po.size() != space.num_objects()) {
    throw ShapeError("attribute marginals do not match the composition space");
  }
}

// Masked softmax over the |S| x |O| grid, gathered back to dense order.
std::vector<double> masked_grid_softmax(const std::vector<double>& grid, const CompositionSpace& space) {
  auto probs = softmax(grid, space.feasibility());
  std::vector<double> dense(space.size());
  for (std::size_t y = 0; y < space.size(); ++y) {
    const auto& p = space.pair(y);
    dense[y] = probs[p.state * space.num_objects() + p.object];
  }
  return dense;
}

std::vector<double> column_means(const Matrix& m) {
  if (m.rows() == 0) throw ContractError("cannot average posteriors over an empty sample set");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  for (double& v : out) v /= static_cast<double>(m.rows());
  return out;
}

void normalize_block(std::vector<double>& w, std::size_t begin, std::size_t end, std::string_view which) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += w[i];
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    diag::emit("degenerate_prior", std::string(which) + " prior has no mass; falling back to uniform");
    for (std::size_t i = begin; i < end; ++i) w[i] = 1.0 / static_cast<double>(end - begin);
    return;
  }
  for (std::size_t i = begin; i < end; ++i) w[i] /= sum;
}

}  // namespace

std::vector<double> compute_k(std::span<const double> state_prior, std::span<const double> object_prior,
                              const CompositionSpace& space, KForm form) {
  check_marginals(state_prior, object_prior, space);
  const std::size_t no = space.num_objects();
  std::vector<double> grid(space.num_states() * no, 0.0);
  for (std::size_t s = 0; s < space.num_states(); ++s) {
    for (std::size_t o = 0; o < no; ++o) {
      const double prod = space.feasibility()[s * no + o] ? state_prior[s] * object_prior[o] : 0.0;
      grid[s * no + o] = form == KForm::product ? prod : std::log(std::max(prod, kProbabilityFloor));
    }
  }
  return masked_grid_softmax(grid, space);
}

AttributePriorTable attribute_prior_from_posteriors(const Matrix& state_posteriors,
                                                    const Matrix& object_posteriors,
                                                    const CompositionSpace& space, KForm form) {
  if (state_posteriors.cols() != space.num_states() || object_posteriors.cols() != space.num_objects() ||
      state_posteriors.rows() != object_posteriors.rows()) {
    throw ShapeError("posterior matrices do not match the composition space");
  }
  AttributePriorTable t;
  t.state_prior = column_means(state_posteriors);
  t.object_prior = column_means(object_posteriors);
  t.k = compute_k(t.state_prior, t.object_prior, space, form);
  return t;
}

AttributePriorTable estimate_attribute_prior(const PrototypeClassifier& state_clf,
                                             const PrototypeClassifier& object_clf,
                                             const Matrix& train_features, const SemanticTable& semantics,
                                             const CompositionSpace& space, KForm form) {
  if (train_features.rows() == 0) throw ContractError("estimate_attribute_prior: empty training set");
  const Matrix ps = softmax_rows(state_clf.logits(train_features, semantics.states));
  const Matrix po = softmax_rows(object_clf.logits(train_features, semantics.objects));
  return attribute_prior_from_posteriors(ps, po, space, form);
}

std::vector<double> instance_k_hat(std::span<const double> state_posterior,
                                   std::span<const double> object_posterior, const CompositionSpace& space) {
  return compute_k(state_posterior, object_posterior, space, KForm::product);
}

std::vector<double> class_frequency_prior(std::span<const std::size_t> train_pairs,
                                          const CompositionSpace& space) {
  std::vector<double> counts(space.size(), 1.0);
  for (std::size_t y : train_pairs) {
    if (y >= space.size()) throw ContractError("class_frequency_prior: pair index out of range");
    counts[y] += 1.0;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double& c : counts) c /= total;
  return counts;
}

std::vector<double> uniform_prior(const CompositionSpace& space) {
  return std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size()));
}

std::vector<double> expand_to_grid(std::span<const double> dense, const CompositionSpace& space) {
  if (dense.size() != space.size()) throw ShapeError("expand_to_grid: length differs from |Y|");
  std::vector<double> grid(space.num_states() * space.num_objects(), 0.0);
  for (std::size_t y = 0; y < space.size(); ++y) {
    const auto& p = space.pair(y);
    grid[p.state * space.num_objects() + p.object] = dense[y];
  }
  return grid;
}

InferencePrior build_inference_prior(std::span<const double> k, std::span<const double> k_hat_x, double lambda,
                                     double eta, const CompositionSpace& space, double floor) {
  if (k.size() != space.size() || k_hat_x.size() != space.size()) {
    throw ShapeError("build_inference_prior: prior vectors must have one entry per feasible pair");
  }
  if (!(lambda > 0.0)) throw ContractError("build_inference_prior: lambda must be positive");
  if (!(eta >= 0.0)) throw ContractError("build_inference_prior: eta must be non-negative");

  const std::size_t n_seen = space.num_seen();
  std::vector<double> w(space.size(), 0.0);
  for (std::size_t y = 0; y < n_seen; ++y) w[y] = k[y];
  const bool importance = std::isfinite(lambda);
  for (std::size_t y = n_seen; y < space.size(); ++y) {
    double denom_k = k[y];
    if (importance && !(k[y] > 0.0)) {
      diag::emit("zero_unseen_prior", "k is zero for unseen pair " + std::to_string(y) + "; using the floor");
      denom_k = floor;
    }
    w[y] = k[y] + (importance ? k_hat_x[y] / (lambda * denom_k) : 0.0);
  }
  if (n_seen > 0) normalize_block(w, 0, n_seen, "seen");
  if (space.size() > n_seen) normalize_block(w, n_seen, space.size(), "unseen");

  InferencePrior prior;
  prior.lambda = lambda;
  prior.eta = eta;
  prior.floor = floor;
  prior.log_prior.resize(w.size());
  for (std::size_t y = 0; y < w.size(); ++y) prior.log_prior[y] = std::log(std::max(w[y], floor));
  return prior;
}

}  // namespace prolt
