#include "prolt/mlp.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "prolt/errors.hpp"

namespace prolt {
namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

}  // namespace

std::vector<std::span<const double>> MlpGrads::views() const {
  std::vector<std::span<const double>> out;
  out.reserve(2 * layers.size());
  for (const auto& l : layers) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  return out;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)), id_(next_id()) {
  if (layers_.empty()) throw ShapeError("Mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.out_dim()) throw ShapeError("Mlp: bias length differs from layer width");
    if (!(l.dropout >= 0.0 && l.dropout < 1.0)) throw ContractError("Mlp: dropout rate must be in [0, 1)");
    if (i + 1 < layers_.size() && l.out_dim() != layers_[i + 1].in_dim()) {
      throw ShapeError("Mlp: layer " + std::to_string(i) + " output does not chain into layer " +
                       std::to_string(i + 1));
    }
  }
}

Mlp Mlp::create(std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const auto& s : specs) {
    DenseLayer l;
    l.weight = Matrix(s.out, s.in);
    const double a = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    for (double& w : l.weight.values()) w = rng.uniform(-a, a);
    l.bias.assign(s.out, 0.0);
    l.activation = s.activation;
    l.dropout = s.dropout;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::pair<Matrix, MlpCache> Mlp::forward(const Matrix& input, bool train, Rng& rng) const {
  if (input.cols() != input_dim()) {
    throw ShapeError("Mlp::forward: input has " + std::to_string(input.cols()) +
                     " columns, network expects " + std::to_string(input_dim()));
  }
  MlpCache cache;
  cache.net_id = id_;
  Matrix x = input;
  for (const auto& l : layers_) {
    Matrix z = matmul_nt(x, l.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      for (std::size_t c = 0; c < zr.size(); ++c) zr[c] += l.bias[c];
    }
    Matrix a = z;
    if (l.activation == Activation::relu) {
      for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    }
    Matrix mask;
    if (train && l.dropout > 0.0) {
      mask = Matrix(a.rows(), a.cols());
      const double keep_scale = 1.0 / (1.0 - l.dropout);
      auto m = mask.values();
      auto av = a.values();
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = rng.uniform() < l.dropout ? 0.0 : keep_scale;
        av[i] *= m[i];
      }
    }
    cache.inputs.push_back(std::move(x));
    cache.pre_activation.push_back(std::move(z));
    cache.dropout_mask.push_back(std::move(mask));
    x = std::move(a);
  }
  return {std::move(x), std::move(cache)};
}

Matrix Mlp::predict(const Matrix& input) const {
  Rng unused(0);
  return forward(input, false, unused).first;
}

MlpGrads Mlp::backward(const MlpCache& cache, const Matrix& output_grad) const {
  if (cache.net_id != id_ || cache.inputs.size() != layers_.size()) {
    throw ContractError("Mlp::backward: cache was produced by a different network");
  }
  const std::size_t batch = cache.inputs.front().rows();
  if (output_grad.rows() != batch || output_grad.cols() != output_dim()) {
    throw ShapeError("Mlp::backward: output gradient shape does not match the forward pass");
  }
  MlpGrads grads;
  grads.layers.resize(layers_.size());
  Matrix g = output_grad;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const auto& mask = cache.dropout_mask[li];
    if (!mask.empty()) {
      auto gv = g.values();
      auto mv = mask.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= mv[i];
    }
    if (l.activation == Activation::relu) {
      auto gv = g.values();
      auto zv = cache.pre_activation[li].values();
      for (std::size_t i = 0; i < gv.size(); ++i) {
        if (zv[i] <= 0.0) gv[i] = 0.0;
      }
    }
    LayerGrad& lg = grads.layers[li];
    lg.weight = matmul_tn(g, cache.inputs[li]);
    lg.bias.assign(l.out_dim(), 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) lg.bias[c] += gr[c];
    }
    g = matmul(g, l.weight);
  }
  grads.input = std::move(g);
  return grads;
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

}  // namespace prolt
