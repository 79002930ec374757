#include "prolt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "prolt/classifier.hpp"
#include "prolt/errors.hpp"
#include "prolt/losses.hpp"
#include "prolt/rng.hpp"
#include "prolt/space.hpp"

namespace prolt {
namespace {

constexpr double kKinkMargin = 1e-3;

struct Problem {
  CompositionSpace space;
  SemanticTable semantics;
  Matrix features;
  std::vector<std::size_t> states, objects, pairs;
  std::vector<double> k;
};

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

Problem make_problem(Rng& rng) {
  const std::size_t ns = 3 + rng.below(2), no = 3 + rng.below(2);
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t s = 0; s < ns; ++s) seen.emplace_back(s, s % no);
  for (std::size_t o = 0; o < no; ++o) seen.emplace_back(o % ns, o);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t o = 0; o < no; ++o)
      if (rng.uniform() < 0.4) seen.emplace_back(s, o);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  std::vector<Composition> pairs;
  for (auto [s, o] : seen) pairs.push_back({s, o, true});
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t o = 0; o < no; ++o)
      if (!std::binary_search(seen.begin(), seen.end(), std::pair{s, o}) && rng.uniform() < 0.5)
        pairs.push_back({s, o, false});

  std::vector<std::string> sn, on;
  for (std::size_t s = 0; s < ns; ++s) sn.push_back("s" + std::to_string(s));
  for (std::size_t o = 0; o < no; ++o) on.push_back("o" + std::to_string(o));

  Problem p{build_space(sn, on, pairs), {random_matrix(ns, 4, rng), random_matrix(no, 4, rng)},
            random_matrix(5, 6, rng), {}, {}, {}, {}};
  for (std::size_t i = 0; i < p.features.rows(); ++i) {
    const std::size_t y = rng.below(p.space.size());
    p.pairs.push_back(y);
    p.states.push_back(p.space.pair(y).state);
    p.objects.push_back(p.space.pair(y).object);
  }
  double total = 0.0;
  for (std::size_t y = 0; y < p.space.size(); ++y) {
    p.k.push_back(0.05 + rng.uniform());
    total += p.k.back();
  }
  for (auto& v : p.k) v /= total;
  return p;
}

// Xavier init leaves biases at zero; small random offsets keep every ReLU
// layer away from the all-dead case where cosine similarity has no gradient.
PrototypeClassifier make_classifier(const ClassifierShape& shape, Rng& rng) {
  PrototypeClassifier clf = PrototypeClassifier::create(shape, rng);
  for (auto block : clf.parameters())
    for (auto& v : block) v += 0.1 * rng.normal();
  return clf;
}

// True when some hidden ReLU input sits within `margin` of its kink, where a
// central difference straddles the non-differentiable point.
bool near_kink(const PrototypeClassifier::Forward& f, double margin) {
  for (const MlpCache* cache : {&f.embedder_cache, &f.prototype_cache}) {
    for (std::size_t l = 0; l + 1 < cache->pre_activation.size(); ++l)
      for (double z : cache->pre_activation[l].values())
        if (std::abs(z) < margin) return true;
  }
  return false;
}

double tensor_error(std::span<const double> a, std::span<const double> n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
}

// Worst tensor error between `analytic` and central differences of `loss`
// over every parameter in `params`.
double compare(const std::function<double()>& loss, std::vector<std::span<double>> params,
               const std::vector<std::span<const double>>& analytic, double h) {
  if (params.size() != analytic.size()) throw ContractError("gradient block count mismatch");
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    std::vector<double> numeric(params[b].size());
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + h;
      const double up = loss();
      params[b][i] = saved - h;
      const double down = loss();
      params[b][i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, tensor_error(analytic[b], numeric));
  }
  return worst;
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.width == 0 || opt.width > 16) throw ValidationError("gradcheck width must be in [1, 16]");
  if (!(opt.step > 0.0)) throw ValidationError("gradcheck step must be positive");
  std::vector<GradcheckCase> out;
  Rng root(opt.seed);
  for (std::size_t inst = 0; inst < opt.instances; ++inst) {
    Rng rng = root.fork(inst);
    const Problem p = make_problem(rng);
    ClassifierShape shape;
    shape.input_dim = p.features.cols();
    shape.semantic_dim = p.semantics.dim();
    shape.hidden_dim = opt.width;
    shape.embed_dim = std::max<std::size_t>(2, opt.width / 2);
    shape.dropout = 0.25;
    shape.temperature = 0.2 + 0.8 * rng.uniform();
    const std::uint64_t mask_seed = rng.next_u64();

    // Dropout stays on; every evaluation replays the same masks.
    auto run = [&](const PrototypeClassifier& clf, const Matrix& sem) {
      Rng masks(mask_seed);
      return clf.forward(p.features, sem, true, masks);
    };

    {
      PrototypeClassifier cs = make_classifier(shape, rng);
      PrototypeClassifier co = make_classifier(shape, rng);
      for (int tries = 0; tries < 100 && near_kink(run(cs, p.semantics.states), kKinkMargin); ++tries)
        cs = make_classifier(shape, rng);
      for (int tries = 0; tries < 100 && near_kink(run(co, p.semantics.objects), kKinkMargin); ++tries)
        co = make_classifier(shape, rng);
      auto loss = [&] {
        return loss_ic(run(cs, p.semantics.states).logits, run(co, p.semantics.objects).logits, p.states, p.objects)
            .loss;
      };
      const auto fs = run(cs, p.semantics.states);
      const auto fo = run(co, p.semantics.objects);
      const auto l = loss_ic(fs.logits, fo.logits, p.states, p.objects);
      const auto gs = cs.backward(fs, l.state_grad);
      const auto go = co.backward(fo, l.object_grad);
      const double err = std::max(compare(loss, cs.parameters(), gs.views(), opt.step),
                                  compare(loss, co.parameters(), go.views(), opt.step));
      out.push_back({"loss_ic", inst, err, err <= opt.tolerance});
    }

    ClassifierShape cshape = shape;
    cshape.semantic_dim = 2 * p.semantics.dim();
    const Matrix comp = p.semantics.compositions(p.space);
    for (double eta : {0.0, 0.5, 1.0}) {
      PrototypeClassifier cy = make_classifier(cshape, rng);
      for (int tries = 0; tries < 100 && near_kink(run(cy, comp), kKinkMargin); ++tries)
        cy = make_classifier(cshape, rng);
      auto loss = [&] { return loss_cls(run(cy, comp).logits, p.pairs, p.k, eta).loss; };
      const auto f = run(cy, comp);
      const auto l = loss_cls(f.logits, p.pairs, p.k, eta);
      const auto g = cy.backward(f, l.grad);
      const double err = compare(loss, cy.parameters(), g.views(), opt.step);
      std::ostringstream name;
      name << "loss_cls eta=" << eta;
      out.push_back({name.str(), inst, err, err <= opt.tolerance});
    }
  }
  return out;
}

}  // namespace prolt
