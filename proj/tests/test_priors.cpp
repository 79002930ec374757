#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "prolt/classifier.hpp"
#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"
#include "prolt/priors.hpp"

using namespace prolt;

namespace {

CompositionSpace three_of_four() {
  // Feasible: (0,0) (1,1) seen, (0,1) unseen; (1,0) infeasible.
  return build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {1, 1, true}, {0, 1, false}});
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("uniform marginals give a uniform k over feasible pairs") {
  const auto space = three_of_four();
  const auto k = compute_k(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}, space);
  REQUIRE(k.size() == 3);
  for (double v : k) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const auto grid = expand_to_grid(k, space);
  CHECK(grid[2] == 0.0);
}

TEST_CASE("single state with every pair feasible: k is the softmax of p(o)") {
  const auto space = build_space({"a"}, {"x", "y", "z"}, {{0, 0, true}, {0, 1, true}, {0, 2, true}});
  const std::vector<double> po{0.2, 0.5, 0.3};
  const auto k = compute_k(std::vector<double>{1.0}, po, space);
  const auto ref = oracle::softmax(po);
  for (std::size_t i = 0; i < 3; ++i) CHECK(k[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("2x2 space with three feasible pairs by hand") {
  const auto space = three_of_four();
  const auto k = compute_k(std::vector<double>{0.7, 0.3}, std::vector<double>{0.6, 0.4}, space);
  // Products 0.42, 0.28, 0.12; the infeasible 0.18 stays out of the partition sum.
  const double z = std::exp(0.42) + std::exp(0.28) + std::exp(0.12);
  CHECK(k[*space.pair_index(0, 0)] == doctest::Approx(std::exp(0.42) / z).epsilon(1e-14));
  CHECK(k[*space.pair_index(0, 1)] == doctest::Approx(std::exp(0.28) / z).epsilon(1e-14));
  CHECK(k[*space.pair_index(1, 1)] == doctest::Approx(std::exp(0.12) / z).epsilon(1e-14));
  CHECK_FALSE(space.pair_index(1, 0).has_value());
  const auto kl = compute_k(std::vector<double>{0.7, 0.3}, std::vector<double>{0.6, 0.4}, space, KForm::log_product);
  CHECK(kl[*space.pair_index(0, 0)] == doctest::Approx(0.42 / 0.82).epsilon(1e-14));
}

TEST_CASE("attribute prior is the mean posterior") {
  const auto space = three_of_four();
  SUBCASE("uniform posteriors") {
    const auto t = attribute_prior_from_posteriors(Matrix(4, 2, 0.5), Matrix(4, 2, 0.5), space);
    CHECK(t.state_prior == std::vector<double>{0.5, 0.5});
    CHECK(t.object_prior == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("one sample") {
    const auto t = attribute_prior_from_posteriors(Matrix{{0.8, 0.2}}, Matrix{{0.35, 0.65}}, space);
    CHECK(t.state_prior[0] == doctest::Approx(0.8));
    CHECK(t.object_prior[1] == doctest::Approx(0.65));
  }
  SUBCASE("five samples") {
    const Matrix ps{{0.9, 0.1}, {0.6, 0.4}, {0.5, 0.5}, {0.2, 0.8}, {0.3, 0.7}};
    const Matrix po{{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}, {0.4, 0.6}, {0.5, 0.5}};
    const auto t = attribute_prior_from_posteriors(ps, po, space);
    CHECK(t.state_prior[0] == doctest::Approx(2.5 / 5));
    CHECK(t.state_prior[1] == doctest::Approx(2.5 / 5));
    CHECK(t.object_prior[0] == doctest::Approx(1.5 / 5));
    CHECK(t.object_prior[1] == doctest::Approx(3.5 / 5));
    CHECK(sum(t.k) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(attribute_prior_from_posteriors(Matrix(0, 2), Matrix(0, 2), space), ContractError);
}

TEST_CASE("estimate from classifiers that cannot tell classes apart is uniform") {
  const auto space = three_of_four();
  auto constant = [](std::size_t in) {
    return Mlp({DenseLayer{Matrix(2, in, 0.0), {1.0, 2.0}, Activation::identity, 0.0}});
  };
  const PrototypeClassifier cs(constant(3), constant(4), 0.1), co(constant(3), constant(4), 0.1);
  Rng rng(1);
  Matrix x(6, 3);
  for (auto& v : x.values()) v = rng.normal();
  const SemanticTable sem{Matrix(2, 4, 0.3), Matrix(2, 4, -0.2)};
  const auto t = estimate_attribute_prior(cs, co, x, sem, space);
  for (double v : t.state_prior) CHECK(v == doctest::Approx(0.5));
  for (double v : t.object_prior) CHECK(v == doctest::Approx(0.5));
  for (double v : t.k) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("instance prior") {
  const auto space = three_of_four();
  const std::vector<double> uniform{0.5, 0.5};
  for (double v : instance_k_hat(uniform, uniform, space)) CHECK(v == doctest::Approx(1.0 / 3));

  const auto peaked = instance_k_hat(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}, space);
  const std::size_t target = *space.pair_index(0, 1);
  for (std::size_t y = 0; y < 3; ++y)
    if (y != target) CHECK(peaked[target] > peaked[y]);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto ps = oracle::random_distribution(rng, 2), po = oracle::random_distribution(rng, 2);
    const auto kh = instance_k_hat(ps, po, space);
    std::vector<double> products;
    for (std::size_t y = 0; y < space.size(); ++y)
      products.push_back(ps[space.pair(y).state] * po[space.pair(y).object]);
    const auto ref = oracle::softmax(products);
    for (std::size_t y = 0; y < 3; ++y) CHECK(kh[y] == doctest::Approx(ref[y]).epsilon(1e-14));
  }
}

TEST_CASE("class-frequency prior uses add-one counts") {
  const auto space = three_of_four();
  const std::vector<std::size_t> train{0, 0, 0, 1};
  const auto p = class_frequency_prior(train, space);
  CHECK(p[0] == doctest::Approx(4.0 / 7));
  CHECK(p[1] == doctest::Approx(2.0 / 7));
  CHECK(p[2] == doctest::Approx(1.0 / 7));
  for (double v : uniform_prior(space)) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("inference prior by hand") {
  // Two seen pairs and one unseen pair in a 2x2 grid plus a second unseen.
  const auto space = build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {1, 1, true}, {0, 1, false}, {1, 0, false}});
  const std::vector<double> k{0.4, 0.3, 0.2, 0.1};
  const std::vector<double> kh{0.1, 0.2, 0.3, 0.4};
  const auto prior = build_inference_prior(k, kh, 10.0, 1.0, space);
  CHECK(std::exp(prior.log_prior[0]) == doctest::Approx(0.4 / 0.7).epsilon(1e-14));
  CHECK(std::exp(prior.log_prior[1]) == doctest::Approx(0.3 / 0.7).epsilon(1e-14));
  const double u2 = 0.2 + 0.3 / (10 * 0.2), u3 = 0.1 + 0.4 / (10 * 0.1);
  CHECK(std::exp(prior.log_prior[2]) == doctest::Approx(u2 / (u2 + u3)).epsilon(1e-14));
  CHECK(std::exp(prior.log_prior[3]) == doctest::Approx(u3 / (u2 + u3)).epsilon(1e-14));

  const auto no_is = build_inference_prior(k, kh, std::numeric_limits<double>::infinity(), 1.0, space);
  CHECK(std::exp(no_is.log_prior[2]) == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(std::exp(no_is.log_prior[3]) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("zero k on an unseen pair is floored and reported") {
  diag::reset();
  const auto space = build_space({"a", "b"}, {"x", "y"}, {{0, 0, true}, {1, 1, true}, {0, 1, false}});
  const auto prior = build_inference_prior(std::vector<double>{0.5, 0.5, 0.0}, std::vector<double>{0.2, 0.3, 0.5},
                                           10.0, 1.0, space);
  CHECK(std::isfinite(prior.log_prior[2]));
  CHECK(prior.log_prior[2] == doctest::Approx(0.0));
  CHECK(diag::count("zero_unseen_prior") == 1);
}

TEST_CASE("priors are distributions on random spaces") {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto space = oracle::random_space(rng);
    const auto ps = oracle::random_distribution(rng, space.num_states());
    const auto po = oracle::random_distribution(rng, space.num_objects());
    for (KForm form : {KForm::product, KForm::log_product}) {
      const auto k = compute_k(ps, po, space, form);
      CHECK(sum(k) == doctest::Approx(1.0).epsilon(1e-12));
      const auto grid = expand_to_grid(k, space);
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!space.feasibility()[i]) CHECK(grid[i] == 0.0);
    }
  }
}
