#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "prolt/matrix.hpp"
#include "prolt/rng.hpp"

namespace prolt {

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

// y = dropout(act(x W^T + b)). Dropout only runs in training mode.
struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;
  double dropout = 0.0;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
  double dropout = 0.0;
};

// Everything backward() needs from one forward pass.
struct MlpCache {
  std::uint64_t net_id = 0;
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> pre_activation;  // x W^T + b
  std::vector<Matrix> dropout_mask;    // empty when dropout was not applied
};

struct LayerGrad {
  Matrix weight;
  std::vector<double> bias;
};

struct MlpGrads {
  std::vector<LayerGrad> layers;
  Matrix input;

  // Flattened views in the same order as Mlp::parameters().
  std::vector<std::span<const double>> views() const;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Weights ~ U[-a, a] with a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static Mlp create(std::span<const LayerSpec> specs, Rng& rng);

  std::pair<Matrix, MlpCache> forward(const Matrix& input, bool train, Rng& rng) const;
  // Inference-mode forward without a cache.
  Matrix predict(const Matrix& input) const;
  MlpGrads backward(const MlpCache& cache, const Matrix& output_grad) const;

  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::uint64_t id() const { return id_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t id_ = 0;
};

}  // namespace prolt
