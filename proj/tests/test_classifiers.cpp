#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "prolt/classifier.hpp"
#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"

using namespace prolt;

namespace {

Mlp constant_net(std::size_t in, std::vector<double> bias) {
  return Mlp({DenseLayer{Matrix(bias.size(), in, 0.0), std::move(bias), Activation::identity, 0.0}});
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

PrototypeClassifier random_classifier(Rng& rng, std::size_t in, std::size_t sem, double tau, double dropout = 0.0) {
  ClassifierShape shape{in, sem, 8, 5, dropout, tau};
  auto clf = PrototypeClassifier::create(shape, rng);
  for (auto block : clf.parameters())
    for (auto& v : block) v += 0.1 * rng.normal();
  return clf;
}

}  // namespace

TEST_CASE("identical unit outputs give logits of 1/tau") {
  const PrototypeClassifier clf(constant_net(3, {0.6, 0.8}), constant_net(2, {3.0, 4.0}), 0.1);
  const Matrix logits = clf.logits(Matrix(4, 3, 1.0), Matrix(5, 2, -1.0));
  CHECK(logits.rows() == 4);
  CHECK(logits.cols() == 5);
  for (double v : logits.values()) CHECK(v == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("orthogonal embeddings give zero logits") {
  const PrototypeClassifier clf(constant_net(3, {1.0, 0.0}), constant_net(2, {0.0, 2.0}), 0.5);
  const Matrix logits = clf.logits(Matrix(2, 3, 0.3), Matrix(3, 2, 0.1));
  for (double v : logits.values()) CHECK(v == 0.0);
}

TEST_CASE("logits match a dot/norm oracle") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const double tau = 0.05 + rng.uniform();
    const auto clf = random_classifier(rng, 6, 4, tau);
    const Matrix x = random_matrix(5, 6, rng), w = random_matrix(3, 4, rng);
    const Matrix v = oracle::mlp_eval(clf.embedder(), x);
    const Matrix p = oracle::mlp_eval(clf.prototype_learner(), w);
    const Matrix logits = clf.logits(x, w);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(std::abs(logits(i, c) - oracle::cosine(v.row(i), p.row(c)) / tau) <= 1e-12);
  }
}

TEST_CASE("logits are invariant to rescaling the embedder output") {
  Rng rng(8);
  const auto clf = random_classifier(rng, 5, 3, 0.2);
  auto layers = clf.embedder().layers();
  for (auto& v : layers.back().weight.values()) v *= 7.5;
  for (auto& v : layers.back().bias) v *= 7.5;
  const PrototypeClassifier scaled(Mlp(layers), clf.prototype_learner(), 0.2);
  const Matrix x = random_matrix(4, 5, rng), w = random_matrix(6, 3, rng);
  const Matrix a = clf.logits(x, w), b = scaled.logits(x, w);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-12));
}

TEST_CASE("a zero embedding scores zero and is reported") {
  diag::reset();
  const PrototypeClassifier clf(constant_net(2, {0.0, 0.0}), constant_net(2, {1.0, 0.0}), 0.1);
  const Matrix logits = clf.logits(Matrix(3, 2, 1.0), Matrix(2, 2, 1.0));
  for (double v : logits.values()) CHECK(v == 0.0);
  CHECK(diag::count("zero_norm_embedding") == 3);
}

TEST_CASE("classifier backward matches central differences") {
  Rng rng(21);
  for (int t = 0; t < 8; ++t) {
    auto clf = random_classifier(rng, 4, 3, 0.1 + 0.5 * rng.uniform(), 0.2);
    const Matrix x = random_matrix(5, 4, rng), w = random_matrix(4, 3, rng), weights = random_matrix(5, 4, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    auto loss = [&] {
      Rng m(mask_seed);
      const Matrix l = clf.forward(x, w, true, m).logits;
      double s = 0;
      for (std::size_t i = 0; i < l.size(); ++i) s += weights.values()[i] * l.values()[i];
      return s;
    };
    Rng m(mask_seed);
    const auto fwd = clf.forward(x, w, true, m);
    const auto grads = clf.backward(fwd, weights);
    const auto views = grads.views();
    auto params = clf.parameters();
    REQUIRE(views.size() == params.size());
    for (std::size_t b = 0; b < params.size(); ++b)
      CHECK(oracle::relative_error(views[b], oracle::central_difference(loss, params[b])) <= 1e-5);
  }
}

TEST_CASE("classifier construction checks tau and shapes") {
  CHECK_THROWS_AS(PrototypeClassifier(constant_net(2, {1, 0}), constant_net(2, {1, 0}), 0.0), ValidationError);
  CHECK_THROWS_AS(PrototypeClassifier(constant_net(2, {1, 0}), constant_net(2, {1, 0, 0}), 0.1), ShapeError);
  const PrototypeClassifier ok(constant_net(2, {1, 0}), constant_net(3, {1, 0}), 0.1);
  CHECK_THROWS_AS(ok.logits(Matrix(1, 2), Matrix(2, 2)), ShapeError);
}

TEST_CASE("semantic table concatenates state and object vectors per pair") {
  const auto space = build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {1, 1, true}, {1, 0, false}});
  const SemanticTable table{Matrix{{1, 2}, {3, 4}}, Matrix{{5, 6}, {7, 8}}};
  const Matrix c = table.compositions(space);
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 4);
  for (std::size_t y = 0; y < 3; ++y) {
    const auto& p = space.pair(y);
    CHECK(c(y, 0) == table.states(p.state, 0));
    CHECK(c(y, 3) == table.objects(p.object, 1));
  }
  const SemanticTable bad{Matrix{{1, 2}}, Matrix{{5, 6}, {7, 8}}};
  CHECK_THROWS_AS(bad.validate(space), ValidationError);
}

TEST_CASE("ensemble endpoints") {
  const auto space = build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {1, 1, true}, {0, 1, false}});
  const Matrix py{{0.2, 0.5, 0.3}}, ps{{0.9, 0.1}}, po{{0.4, 0.6}};
  CHECK(ensemble_posterior(py, ps, po, {1.0}, space) == py);
  const Matrix only_attr = ensemble_posterior(py, ps, po, {0.0}, space);
  for (std::size_t y = 0; y < 3; ++y) {
    const auto& p = space.pair(y);
    CHECK(only_attr(0, y) == doctest::Approx(ps(0, p.state) + po(0, p.object)));
  }
  CHECK_THROWS_AS(ensemble_posterior(py, ps, po, {1.5}, space), ContractError);
}

TEST_CASE("ensemble on a 2x2 space by hand") {
  const auto space =
      build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {0, 1, true}, {1, 0, true}, {1, 1, true}});
  // Dense order: (a,x) (a,y) (b,x) (b,y).
  const Matrix py{{0.1, 0.2, 0.3, 0.4}}, ps{{0.7, 0.3}}, po{{0.6, 0.4}};
  const Matrix e = ensemble_posterior(py, ps, po, {0.5}, space);
  CHECK(e(0, 0) == doctest::Approx(0.05 + 0.5 * 1.3));
  CHECK(e(0, 1) == doctest::Approx(0.10 + 0.5 * 1.1));
  CHECK(e(0, 2) == doctest::Approx(0.15 + 0.5 * 0.9));
  CHECK(e(0, 3) == doctest::Approx(0.20 + 0.5 * 0.7));
}
