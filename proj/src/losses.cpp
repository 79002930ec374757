#include "prolt/losses.hpp"

#include <cmath>
#include <string>

#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"
#include "prolt/softmax.hpp"

namespace prolt {
namespace {

void check_labels(const Matrix& logits, std::span<const std::size_t> labels) {
  if (logits.rows() == 0) throw ContractError("loss over an empty batch");
  if (labels.size() != logits.rows()) throw ShapeError("one label per logit row is required");
  for (std::size_t y : labels) {
    if (y >= logits.cols()) {
      throw ContractError("label " + std::to_string(y) + " out of range for " + std::to_string(logits.cols()) +
                          " classes");
    }
  }
}

}  // namespace

LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  check_labels(logits, labels);
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  LossResult out;
  out.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto logp = log_softmax(logits.row(i));
    out.loss -= logp[labels[i]];
    auto g = out.grad.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = std::exp(logp[c]) * inv_n;
    g[labels[i]] -= inv_n;
  }
  out.loss *= inv_n;
  if (!std::isfinite(out.loss)) throw NumericalError("cross-entropy is not finite");
  return out;
}

IndependentLoss loss_ic(const Matrix& state_logits, const Matrix& object_logits,
                        std::span<const std::size_t> state_labels, std::span<const std::size_t> object_labels) {
  if (state_logits.rows() != object_logits.rows()) throw ShapeError("loss_ic: batch sizes differ");
  auto s = cross_entropy(state_logits, state_labels);
  auto o = cross_entropy(object_logits, object_labels);
  return {s.loss + o.loss, std::move(s.grad), std::move(o.grad)};
}

LossResult loss_cls(const Matrix& logits, std::span<const std::size_t> labels, std::span<const double> k,
                    double eta, double floor) {
  check_labels(logits, labels);
  if (k.size() != logits.cols()) throw ShapeError("loss_cls: prior length differs from class count");
  if (!(eta >= 0.0)) throw ContractError("loss_cls: eta must be non-negative");
  if (eta == 0.0) return cross_entropy(logits, labels);

  std::vector<double> shift(k.size());
  for (std::size_t c = 0; c < k.size(); ++c) shift[c] = eta * std::log(std::max(k[c], floor));
  for (std::size_t y : labels) {
    if (!(k[y] > 0.0)) diag::emit("zero_label_prior", "k is zero for a ground-truth class; floored");
  }
  Matrix adjusted = logits;
  for (std::size_t i = 0; i < adjusted.rows(); ++i) {
    auto r = adjusted.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] += shift[c];
  }
  // The shift is constant in the logits, so the gradient passes through unchanged.
  return cross_entropy(adjusted, labels);
}

}  // namespace prolt
