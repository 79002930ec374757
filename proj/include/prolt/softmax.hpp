#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "prolt/matrix.hpp"

namespace prolt {

// 1 = entry participates, 0 = excluded from the partition sum.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Masked entries come back as kNegInf. Throws ContractError if every entry is masked.
std::vector<double> log_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask);
std::vector<double> log_softmax(std::span<const double> logits);

// Masked entries come back as exactly 0.
std::vector<double> softmax(std::span<const double> logits, std::span<const std::uint8_t> mask);
std::vector<double> softmax(std::span<const double> logits);

double log_sum_exp(std::span<const double> values);

// Row-wise softmax of a logit matrix.
Matrix softmax_rows(const Matrix& logits);

}  // namespace prolt
