#include "prolt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "prolt/errors.hpp"
#include "prolt/rng.hpp"

namespace prolt {
namespace {

constexpr int kMaxLayoutAttempts = 10000;

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = norm2(v);
  } while (n == 0.0);
  for (double& x : v) x /= n;
  return v;
}

struct Layout {
  std::vector<Composition> pairs;
};

// Draws feasible pairs and the unseen subset until every state and object
// keeps at least one seen pair.
Layout draw_layout(const SynthSpec& spec, Rng& rng) {
  const std::size_t ns = spec.num_states, no = spec.num_objects;
  for (int attempt = 0; attempt < kMaxLayoutAttempts; ++attempt) {
    std::vector<Composition> feasible;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t o = 0; o < no; ++o) {
        if (spec.pair_density >= 1.0 || rng.uniform() < spec.pair_density) feasible.push_back({s, o, true});
      }
    }
    if (feasible.size() < 2) continue;
    const auto n_unseen = static_cast<std::size_t>(std::lround(spec.unseen_fraction * feasible.size()));
    if (n_unseen >= feasible.size()) continue;
    std::vector<std::size_t> order(feasible.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < n_unseen; ++i) feasible[order[i]].seen = false;

    std::vector<bool> s_ok(ns, false), o_ok(no, false);
    for (const auto& p : feasible) {
      if (p.seen) {
        s_ok[p.state] = true;
        o_ok[p.object] = true;
      }
    }
    if (std::all_of(s_ok.begin(), s_ok.end(), [](bool b) { return b; }) &&
        std::all_of(o_ok.begin(), o_ok.end(), [](bool b) { return b; })) {
      return {std::move(feasible)};
    }
  }
  throw ValidationError("synthetic spec is infeasible: could not place unseen pairs while keeping every state "
                        "and object in a seen pair");
}

std::size_t round_count(double x) { return static_cast<std::size_t>(std::max(0L, std::lround(x))); }

}  // namespace

void validate_spec(const SynthSpec& spec) {
  auto fail = [](const std::string& msg) { throw ValidationError("synthetic spec: " + msg); };
  if (spec.num_states == 0 || spec.num_objects == 0) fail("need at least one state and one object");
  if (!(spec.pair_density > 0.0 && spec.pair_density <= 1.0)) fail("pair density must lie in (0, 1]");
  if (!(spec.unseen_fraction >= 0.0 && spec.unseen_fraction < 1.0)) fail("unseen fraction must lie in [0, 1)");
  if (spec.samples_per_pair < 3) fail("need at least 3 samples per pair");
  if (!(spec.count_ratio >= 1.0)) fail("count ratio must be at least 1");
  if (spec.feature_dim == 0 || spec.semantic_dim == 0) fail("dimensions must be positive");
  if (!(spec.noise >= 0.0)) fail("noise must be non-negative");
  if (!(spec.bias_strength >= 0.0 && spec.bias_strength <= 1.0)) fail("bias strength must lie in [0, 1]");
  if (!(spec.biased_pair_fraction >= 0.0 && spec.biased_pair_fraction <= 1.0)) {
    fail("biased pair fraction must lie in [0, 1]");
  }
  if (!(spec.interaction >= 0.0)) fail("interaction must be non-negative");
  if (!(spec.train_fraction > 0.0 && spec.val_fraction >= 0.0 && spec.train_fraction + spec.val_fraction < 1.0)) {
    fail("train/val fractions must be positive and leave room for test samples");
  }
}

FeatureBundle generate(const SynthSpec& spec) {
  validate_spec(spec);
  Rng root(spec.seed);
  Rng layout_rng = root.fork(0);
  Rng latent_rng = root.fork(1);
  Rng semantic_rng = root.fork(2);
  Rng sample_rng = root.fork(3);

  Layout layout = draw_layout(spec, layout_rng);

  std::vector<std::string> states, objects;
  for (std::size_t s = 0; s < spec.num_states; ++s) states.push_back("state" + std::to_string(s));
  for (std::size_t o = 0; o < spec.num_objects; ++o) objects.push_back("object" + std::to_string(o));

  FeatureBundle b;
  b.space = build_space(std::move(states), std::move(objects), std::move(layout.pairs));
  b.dim = spec.feature_dim;
  b.semantics = random_semantics(spec.num_states, spec.num_objects, spec.semantic_dim, semantic_rng);

  const std::size_t d = spec.feature_dim;
  std::vector<std::vector<double>> mu_s, mu_o, bias_dir, pair_dir;
  for (std::size_t s = 0; s < spec.num_states; ++s) mu_s.push_back(random_unit(d, latent_rng));
  for (std::size_t o = 0; o < spec.num_objects; ++o) mu_o.push_back(random_unit(d, latent_rng));
  for (std::size_t o = 0; o < spec.num_objects; ++o) bias_dir.push_back(random_unit(d, latent_rng));
  // Contextual appearance: the state direction with an object-specific sign
  // pattern, so the term is a fixed function of (s, o) for seen and unseen pairs.
  std::vector<std::vector<double>> flips;
  for (std::size_t o = 0; o < spec.num_objects; ++o) {
    flips.emplace_back(d);
    for (double& f : flips.back()) f = latent_rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  for (std::size_t y = 0; y < b.space.size(); ++y) {
    const auto& p = b.space.pair(y);
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = mu_s[p.state][k] * flips[p.object][k];
    pair_dir.push_back(std::move(v));
  }

  // Biased pairs are drawn from all feasible pairs, independently of counts.
  std::vector<std::size_t> order(b.space.size());
  std::iota(order.begin(), order.end(), 0);
  latent_rng.shuffle(order);
  const auto n_biased = static_cast<std::size_t>(std::lround(spec.biased_pair_fraction * b.space.size()));
  std::vector<bool> biased(b.space.size(), false);
  for (std::size_t i = 0; i < n_biased; ++i) biased[order[i]] = true;
  if (spec.bias_strength > 0.0) {
    for (std::size_t y = 0; y < b.space.size(); ++y) {
      if (biased[y]) b.biased_pairs.push_back(y);
    }
  }

  // Per-pair counts: seen pairs spread geometrically over [base / sqrt(r), base * sqrt(r)].
  std::vector<std::size_t> counts(b.space.size(), spec.samples_per_pair);
  {
    const std::size_t ns = b.space.num_seen();
    std::vector<std::size_t> rank(ns);
    std::iota(rank.begin(), rank.end(), 0);
    latent_rng.shuffle(rank);
    for (std::size_t y = 0; y < ns; ++y) {
      const double t = ns > 1 ? static_cast<double>(rank[y]) / static_cast<double>(ns - 1) - 0.5 : 0.0;
      counts[y] = std::max<std::size_t>(3, round_count(spec.samples_per_pair * std::pow(spec.count_ratio, t)));
    }
  }

  const double noise_scale = spec.noise / std::sqrt(static_cast<double>(d));
  std::vector<double> x(d);
  for (std::size_t y = 0; y < b.space.size(); ++y) {
    const auto& p = b.space.pair(y);
    std::vector<double> center(d);
    const double beta = biased[y] ? spec.bias_strength : 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      center[k] = (1.0 - beta) * mu_s[p.state][k] + beta * bias_dir[p.object][k] + mu_o[p.object][k] +
                  spec.interaction * pair_dir[y][k];
    }
    const double cn = norm2(center);
    if (cn > 0.0) {
      for (double& v : center) v /= cn;
    }

    const std::size_t n = counts[y];
    std::vector<Split> split_of(n, Split::test);
    if (b.space.is_seen(y)) {
      const std::size_t n_train = std::max<std::size_t>(1, round_count(n * spec.train_fraction));
      const std::size_t n_val = std::min(n - n_train, round_count(n * spec.val_fraction));
      for (std::size_t i = 0; i < n; ++i) {
        split_of[i] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) split_of[i] = i < n / 2 ? Split::val : Split::test;
    }

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) x[k] = center[k] + noise_scale * sample_rng.normal();
      for (double v : x) b.features.push_back(static_cast<float>(v));
      b.labels.push_back({static_cast<std::uint32_t>(p.state), static_cast<std::uint32_t>(p.object)});
      b.splits.push_back(split_of[i]);
    }
  }

  std::ostringstream prov;
  prov << "synthetic: states=" << spec.num_states << " objects=" << spec.num_objects
       << " density=" << spec.pair_density << " unseen_fraction=" << spec.unseen_fraction
       << " samples_per_pair=" << spec.samples_per_pair << " count_ratio=" << spec.count_ratio
       << " dim=" << spec.feature_dim << " semantic_dim=" << spec.semantic_dim << " noise=" << spec.noise
       << " bias=" << spec.bias_strength << " biased_fraction=" << spec.biased_pair_fraction
       << " interaction=" << spec.interaction << " seed=" << spec.seed;
  b.provenance = prov.str();
  validate_bundle(b);
  return b;
}

std::vector<ImbalanceRow> imbalance_report(const FeatureBundle& bundle, const Matrix& posteriors,
                                           std::span<const std::size_t> eval_rows,
                                           std::span<const std::size_t> classes) {
  const auto& space = bundle.space;
  if (posteriors.rows() != eval_rows.size() || posteriors.cols() != space.size()) {
    throw ShapeError("imbalance_report: posterior matrix does not match the evaluation rows and |Y|");
  }
  std::vector<double> train_counts(space.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    if (bundle.splits[i] != Split::train) continue;
    train_counts[bundle.pair_of(i)] += 1.0;
    total += 1.0;
  }
  std::vector<double> post_sum(space.size(), 0.0);
  std::vector<std::size_t> post_n(space.size(), 0);
  for (std::size_t r = 0; r < eval_rows.size(); ++r) {
    const std::size_t y = bundle.pair_of(eval_rows[r]);
    post_sum[y] += posteriors(r, y);
    ++post_n[y];
  }
  std::vector<bool> is_biased(space.size(), false);
  for (std::size_t y : bundle.biased_pairs) is_biased[y] = true;

  std::vector<ImbalanceRow> rows;
  for (std::size_t y : classes) {
    if (y >= space.size()) throw ContractError("imbalance_report: class index out of range");
    if (post_n[y] == 0) continue;
    rows.push_back({y, total > 0.0 ? train_counts[y] / total : 0.0, post_sum[y] / static_cast<double>(post_n[y]),
                    post_n[y], is_biased[y]});
  }
  return rows;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("spearman: lengths differ");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace prolt
