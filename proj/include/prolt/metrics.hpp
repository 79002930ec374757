#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "prolt/matrix.hpp"
#include "prolt/priors.hpp"
#include "prolt/space.hpp"

namespace prolt {

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct InferenceResult {
  std::vector<double> scores;  // C_y(x) + eta * log prior(y)
  std::size_t predicted = 0;
};

InferenceResult infer(std::span<const double> logits, const InferencePrior& prior);

struct Prediction {
  std::size_t predicted = 0;
  std::size_t truth = 0;
};

// 2 / (1/a_s + 1/a_u), or 0 when either accuracy is 0.
double harmonic_mean(double seen_accuracy, double unseen_accuracy);

// Fractions of predictions whose state (object) matches the truth.
std::pair<double, double> attribute_accuracy(std::span<const Prediction> predictions,
                                             const CompositionSpace& space);

struct CurvePoint {
  double bias = 0.0;  // +-inf at the two ends
  double seen = 0.0;
  double unseen = 0.0;
  double state = 0.0;
  double object = 0.0;
};

struct EvalReport {
  // nullopt when the evaluated split has no samples on the needed side.
  std::optional<double> best_seen;
  std::optional<double> best_unseen;
  std::optional<double> best_hm;
  std::optional<double> auc;
  double best_state = 0.0;
  double best_object = 0.0;
  std::size_t seen_samples = 0;
  std::size_t unseen_samples = 0;
  std::vector<CurvePoint> curve;  // ordered by increasing bias
};

// Adds a calibration bias b to every unseen-pair score and traces
// (seen accuracy, unseen accuracy) over every b at which some decision flips:
// the per-sample gaps (best seen score - best unseen score) plus +-inf.
// AUC integrates seen accuracy over unseen accuracy with the trapezoid rule.
EvalReport bias_sweep(const Matrix& scores, std::span<const std::size_t> truths, const CompositionSpace& space);

}  // namespace prolt
