#include "prolt/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "prolt/errors.hpp"

namespace prolt {

std::vector<double> log_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (mask.size() != logits.size()) throw ShapeError("log_softmax: mask length differs from logits");
  double top = kNegInf;
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    top = std::max(top, logits[i]);
  }
  if (!any) throw ContractError("log_softmax: every entry is masked");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) sum += std::exp(logits[i] - top);
  }
  const double log_z = top + std::log(sum);
  std::vector<double> out(logits.size(), kNegInf);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) out[i] = logits[i] - log_z;
  }
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  Mask all(logits.size(), 1);
  return log_softmax(logits, all);
}

std::vector<double> softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  auto out = log_softmax(logits, mask);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? std::exp(out[i]) : 0.0;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  Mask all(logits.size(), 1);
  return softmax(logits, all);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ContractError("log_sum_exp: empty input");
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace prolt
