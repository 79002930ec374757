#include "prolt/classifier.hpp"

#include <cmath>
#include <string>

#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"

namespace prolt {
namespace {

constexpr double kNormFloor = 1e-12;

// Normalizes rows in place and returns the original norms.
std::vector<double> normalize_rows(Matrix& m, std::string_view what) {
  std::vector<double> norms(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm2(row);
    norms[r] = n;
    if (n < kNormFloor) {
      diag::emit("zero_norm_embedding",
                 std::string(what) + " row " + std::to_string(r) + " has zero norm; cosine taken as 0");
      for (double& v : row) v = 0.0;
    } else {
      for (double& v : row) v /= n;
    }
  }
  return norms;
}

// Gradient through u -> u / |u| given the gradient w.r.t. the unit vector.
Matrix unnormalize_grad(const Matrix& unit, const std::vector<double>& norms, const Matrix& unit_grad) {
  Matrix out(unit.rows(), unit.cols());
  for (std::size_t r = 0; r < unit.rows(); ++r) {
    if (norms[r] < kNormFloor) continue;
    auto u = unit.row(r);
    auto g = unit_grad.row(r);
    const double proj = dot(u, g);
    auto o = out.row(r);
    for (std::size_t c = 0; c < u.size(); ++c) o[c] = (g[c] - proj * u[c]) / norms[r];
  }
  return out;
}

}  // namespace

Matrix SemanticTable::compositions(const CompositionSpace& space) const {
  validate(space);
  const std::size_t d = dim();
  Matrix out(space.size(), 2 * d);
  for (std::size_t y = 0; y < space.size(); ++y) {
    const auto& p = space.pair(y);
    auto dst = out.row(y);
    auto sv = states.row(p.state);
    auto ov = objects.row(p.object);
    std::copy(sv.begin(), sv.end(), dst.begin());
    std::copy(ov.begin(), ov.end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

void SemanticTable::validate(const CompositionSpace& space) const {
  if (states.rows() != space.num_states() || objects.rows() != space.num_objects()) {
    throw ValidationError("semantic table does not have one vector per state and object");
  }
  if (states.cols() != objects.cols() || states.cols() == 0) {
    throw ValidationError("state and object semantic vectors must share a nonzero dimension");
  }
  if (!states.all_finite() || !objects.all_finite()) {
    throw ValidationError("semantic table contains non-finite values");
  }
}

std::vector<std::span<const double>> ClassifierGrads::views() const {
  auto out = embedder.views();
  auto p = prototype.views();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

PrototypeClassifier::PrototypeClassifier(Mlp embedder, Mlp prototype_learner, double temperature)
    : embedder_(std::move(embedder)), prototype_(std::move(prototype_learner)), temperature_(temperature) {
  if (!(temperature_ > 0.0)) throw ValidationError("temperature must be positive");
  if (embedder_.output_dim() != prototype_.output_dim()) {
    throw ShapeError("embedder and prototype learner must share an output dimension");
  }
}

PrototypeClassifier PrototypeClassifier::create(const ClassifierShape& shape, Rng& rng) {
  const LayerSpec embed_layers[] = {
      {shape.input_dim, shape.hidden_dim, Activation::relu, shape.dropout},
      {shape.hidden_dim, shape.embed_dim, Activation::identity, 0.0},
  };
  const LayerSpec proto_layers[] = {
      {shape.semantic_dim, shape.hidden_dim, Activation::relu, 0.0},
      {shape.hidden_dim, shape.embed_dim, Activation::identity, 0.0},
  };
  Mlp v = Mlp::create(embed_layers, rng);
  Mlp p = Mlp::create(proto_layers, rng);
  return PrototypeClassifier(std::move(v), std::move(p), shape.temperature);
}

PrototypeClassifier::Forward PrototypeClassifier::forward(const Matrix& features, const Matrix& semantics,
                                                          bool train, Rng& rng) const {
  if (semantics.cols() != prototype_.input_dim()) {
    throw ShapeError("classifier: semantic vectors have " + std::to_string(semantics.cols()) +
                     " columns, prototype learner expects " + std::to_string(prototype_.input_dim()));
  }
  Forward f;
  auto [emb, ecache] = embedder_.forward(features, train, rng);
  auto [proto, pcache] = prototype_.forward(semantics, train, rng);
  f.embedding_norms = normalize_rows(emb, "embedding");
  f.prototype_norms = normalize_rows(proto, "prototype");
  f.logits = matmul_nt(emb, proto);
  const double inv_tau = 1.0 / temperature_;
  for (double& v : f.logits.values()) v *= inv_tau;
  f.unit_embeddings = std::move(emb);
  f.unit_prototypes = std::move(proto);
  f.embedder_cache = std::move(ecache);
  f.prototype_cache = std::move(pcache);
  return f;
}

Matrix PrototypeClassifier::logits(const Matrix& features, const Matrix& semantics) const {
  Rng unused(0);
  return forward(features, semantics, false, unused).logits;
}

ClassifierGrads PrototypeClassifier::backward(const Forward& fwd, const Matrix& logit_grad) const {
  if (logit_grad.rows() != fwd.logits.rows() || logit_grad.cols() != fwd.logits.cols()) {
    throw ShapeError("classifier backward: logit gradient shape mismatch");
  }
  Matrix g = logit_grad;
  const double inv_tau = 1.0 / temperature_;
  for (double& v : g.values()) v *= inv_tau;
  const Matrix d_unit_emb = matmul(g, fwd.unit_prototypes);
  const Matrix d_unit_proto = matmul_tn(g, fwd.unit_embeddings);
  ClassifierGrads out;
  out.embedder = embedder_.backward(fwd.embedder_cache,
                                    unnormalize_grad(fwd.unit_embeddings, fwd.embedding_norms, d_unit_emb));
  out.prototype = prototype_.backward(
      fwd.prototype_cache, unnormalize_grad(fwd.unit_prototypes, fwd.prototype_norms, d_unit_proto));
  return out;
}

std::vector<std::span<double>> PrototypeClassifier::parameters() {
  auto out = embedder_.parameters();
  auto p = prototype_.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<std::span<const double>> PrototypeClassifier::parameters() const {
  auto out = embedder_.parameters();
  auto p = prototype_.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<std::size_t> PrototypeClassifier::parameter_sizes() const {
  std::vector<std::size_t> sizes;
  for (auto v : parameters()) sizes.push_back(v.size());
  return sizes;
}

Matrix ensemble_posterior(const Matrix& py, const Matrix& ps, const Matrix& po, EnsembleConfig cfg,
                          const CompositionSpace& space) {
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) throw ContractError("ensemble delta must lie in [0, 1]");
  if (py.cols() != space.size() || ps.cols() != space.num_states() || po.cols() != space.num_objects() ||
      py.rows() != ps.rows() || py.rows() != po.rows()) {
    throw ShapeError("ensemble_posterior: posterior shapes do not match the composition space");
  }
  Matrix out(py.rows(), py.cols());
  for (std::size_t i = 0; i < py.rows(); ++i) {
    for (std::size_t y = 0; y < space.size(); ++y) {
      const auto& p = space.pair(y);
      out(i, y) = cfg.delta * py(i, y) + (1.0 - cfg.delta) * (ps(i, p.state) + po(i, p.object));
    }
  }
  return out;
}

}  // namespace prolt
