#pragma once

#include <span>
#include <vector>

#include "prolt/matrix.hpp"
#include "prolt/mlp.hpp"
#include "prolt/rng.hpp"
#include "prolt/space.hpp"

namespace prolt {

// Word-vector table. A composition's vector is the concatenation of its
// state vector and its object vector.
struct SemanticTable {
  Matrix states;   // |S| x d_w
  Matrix objects;  // |O| x d_w

  std::size_t dim() const { return states.cols(); }
  // |Y| x 2 d_w, rows in dense pair order.
  Matrix compositions(const CompositionSpace& space) const;
  void validate(const CompositionSpace& space) const;
};

struct ClassifierShape {
  std::size_t input_dim = 64;
  std::size_t semantic_dim = 16;
  std::size_t hidden_dim = 1024;
  std::size_t embed_dim = 512;
  double dropout = 0.3;
  double temperature = 0.1;
};

struct ClassifierGrads {
  MlpGrads embedder;
  MlpGrads prototype;

  std::vector<std::span<const double>> views() const;
};

// Cosine prototype classifier: logit(x, c) = cos(V(x), P(w_c)) / tau.
class PrototypeClassifier {
 public:
  struct Forward {
    Matrix logits;
    Matrix unit_embeddings;  // rows of V(x) / |V(x)|, zero rows for degenerate samples
    Matrix unit_prototypes;
    std::vector<double> embedding_norms;
    std::vector<double> prototype_norms;
    MlpCache embedder_cache;
    MlpCache prototype_cache;
  };

  PrototypeClassifier() = default;
  PrototypeClassifier(Mlp embedder, Mlp prototype_learner, double temperature);

  // V: in -> hidden (ReLU, dropout) -> embed.  P: sem -> hidden (ReLU) -> embed.
  static PrototypeClassifier create(const ClassifierShape& shape, Rng& rng);

  Forward forward(const Matrix& features, const Matrix& semantics, bool train, Rng& rng) const;
  Matrix logits(const Matrix& features, const Matrix& semantics) const;
  ClassifierGrads backward(const Forward& fwd, const Matrix& logit_grad) const;

  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::vector<std::size_t> parameter_sizes() const;

  const Mlp& embedder() const { return embedder_; }
  const Mlp& prototype_learner() const { return prototype_; }
  double temperature() const { return temperature_; }

 private:
  Mlp embedder_;
  Mlp prototype_;
  double temperature_ = 0.1;
};

struct EnsembleConfig {
  double delta = 0.5;
};

// delta * p(y|x) + (1 - delta) * [p(s|x) + p(o|x)] for each feasible y = (s, o).
// Inputs are row-normalized posteriors; the result is a score, not a distribution.
Matrix ensemble_posterior(const Matrix& py, const Matrix& ps, const Matrix& po, EnsembleConfig cfg,
                          const CompositionSpace& space);

}  // namespace prolt
