#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prolt/bundle.hpp"
#include "prolt/matrix.hpp"

namespace prolt {

// Synthetic compositional benchmark with controllable visual bias.
//
// Every state s and object o gets a random unit latent direction (mu_s, mu_o).
// A sample of pair (s, o) is
//   x = normalize(c_so + mu_o + interaction * xi_so) + noise * N(0, I / d_x)
// with c_so = mu_s for ordinary pairs and c_so = (1 - beta) mu_s + beta d_o for
// biased pairs, where d_o is a per-object direction. At beta = 1 the state part
// of a biased pair carries no information about the state. The contextual term
// xi_so is mu_s with a per-object random sign flip on every coordinate, so how
// a state looks depends on the object it sits on, for seen and unseen pairs
// alike.
struct SynthSpec {
  std::size_t num_states = 8;
  std::size_t num_objects = 10;
  double pair_density = 0.6;
  double unseen_fraction = 0.25;
  std::size_t samples_per_pair = 40;
  // Ratio between the largest and smallest per-pair sample count among seen
  // pairs; counts are spread geometrically. 1 gives balanced pairs.
  double count_ratio = 1.0;
  std::size_t feature_dim = 64;
  std::size_t semantic_dim = 16;
  double noise = 1.25;
  double bias_strength = 0.0;
  double biased_pair_fraction = 0.5;
  // Weight of the contextual term xi_so; 0 disables it.
  double interaction = 1.0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

void validate_spec(const SynthSpec& spec);

// Space, semantics, features, labels and splits in one bundle. Train holds
// seen pairs only; val and test each hold held-out seen samples and samples of
// every unseen pair.
FeatureBundle generate(const SynthSpec& spec);

// One row per class: training-count share next to the mean posterior a model
// assigns to the true class.
struct ImbalanceRow {
  std::size_t pair = 0;
  double count_share = 0.0;
  double mean_posterior = 0.0;
  std::size_t eval_samples = 0;
  bool biased = false;
};

// `posteriors` rows correspond to `eval_rows` (bundle sample indices) and
// columns to dense pairs. Classes without evaluation samples are skipped.
std::vector<ImbalanceRow> imbalance_report(const FeatureBundle& bundle, const Matrix& posteriors,
                                           std::span<const std::size_t> eval_rows,
                                           std::span<const std::size_t> classes);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace prolt
