#include "prolt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prolt/errors.hpp"

namespace prolt {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

InferenceResult infer(std::span<const double> logits, const InferencePrior& prior) {
  if (logits.size() != prior.log_prior.size()) throw ShapeError("infer: prior length differs from logits");
  InferenceResult r;
  r.scores.resize(logits.size());
  for (std::size_t y = 0; y < logits.size(); ++y) {
    r.scores[y] = prior.eta == 0.0 ? logits[y] : logits[y] + prior.eta * prior.log_prior[y];
  }
  r.predicted = argmax(r.scores);
  return r;
}

double harmonic_mean(double seen_accuracy, double unseen_accuracy) {
  if (seen_accuracy <= 0.0 || unseen_accuracy <= 0.0) return 0.0;
  return 2.0 / (1.0 / seen_accuracy + 1.0 / unseen_accuracy);
}

std::pair<double, double> attribute_accuracy(std::span<const Prediction> predictions,
                                             const CompositionSpace& space) {
  if (predictions.empty()) return {0.0, 0.0};
  std::size_t state_hits = 0, object_hits = 0;
  for (const auto& p : predictions) {
    const auto& a = space.pair(p.predicted);
    const auto& b = space.pair(p.truth);
    state_hits += a.state == b.state;
    object_hits += a.object == b.object;
  }
  const double n = static_cast<double>(predictions.size());
  return {static_cast<double>(state_hits) / n, static_cast<double>(object_hits) / n};
}

EvalReport bias_sweep(const Matrix& scores, std::span<const std::size_t> truths, const CompositionSpace& space) {
  if (scores.cols() != space.size()) throw ShapeError("bias_sweep: score columns differ from |Y|");
  if (scores.rows() != truths.size()) throw ShapeError("bias_sweep: one truth per score row is required");
  if (!scores.all_finite()) throw NumericalError("bias_sweep: non-finite scores");

  const std::size_t n = scores.rows();
  const std::size_t ns = space.num_seen();
  const bool has_seen_classes = ns > 0;
  const bool has_unseen_classes = space.num_unseen() > 0;

  struct Sample {
    std::size_t seen_pred = 0, unseen_pred = 0, truth = 0;
    double gap = 0.0;
  };
  std::vector<Sample> samples(n);
  EvalReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (truths[i] >= space.size()) throw ContractError("bias_sweep: truth index out of range");
    auto row = scores.row(i);
    Sample& s = samples[i];
    s.truth = truths[i];
    if (has_seen_classes) s.seen_pred = argmax(row.subspan(0, ns));
    if (has_unseen_classes) s.unseen_pred = ns + argmax(row.subspan(ns));
    if (has_seen_classes && has_unseen_classes) {
      s.gap = row[s.seen_pred] - row[s.unseen_pred];
    } else {
      s.gap = has_seen_classes ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    }
    if (space.is_seen(s.truth)) {
      ++report.seen_samples;
    } else {
      ++report.unseen_samples;
    }
  }

  // Counters for the current decision set; a sample flips from its best seen
  // pair to its best unseen pair once the bias exceeds its gap.
  std::ptrdiff_t seen_hits = 0, unseen_hits = 0, state_hits = 0, object_hits = 0;
  auto tally = [&](std::size_t pred, std::size_t truth, int sign) {
    const auto& a = space.pair(pred);
    const auto& b = space.pair(truth);
    const bool hit = pred == truth;
    if (space.is_seen(truth)) {
      seen_hits += sign * hit;
    } else {
      unseen_hits += sign * hit;
    }
    state_hits += sign * (a.state == b.state);
    object_hits += sign * (a.object == b.object);
  };
  auto initial_pred = [&](const Sample& s) { return has_seen_classes ? s.seen_pred : s.unseen_pred; };
  for (const auto& s : samples) tally(initial_pred(s), s.truth, +1);

  const double inv_seen = report.seen_samples ? 1.0 / static_cast<double>(report.seen_samples) : 0.0;
  const double inv_unseen = report.unseen_samples ? 1.0 / static_cast<double>(report.unseen_samples) : 0.0;
  const double inv_all = n ? 1.0 / static_cast<double>(n) : 0.0;
  auto record = [&](double bias) {
    report.curve.push_back({bias, static_cast<double>(seen_hits) * inv_seen,
                            static_cast<double>(unseen_hits) * inv_unseen, static_cast<double>(state_hits) * inv_all,
                            static_cast<double>(object_hits) * inv_all});
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  record(-inf);
  if (has_seen_classes && has_unseen_classes) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].gap < samples[b].gap; });
    std::size_t i = 0;
    while (i < n) {
      const double g = samples[order[i]].gap;
      record(g);  // samples with gap < g have flipped, those at g have not
      while (i < n && samples[order[i]].gap == g) {
        const Sample& s = samples[order[i]];
        tally(s.seen_pred, s.truth, -1);
        tally(s.unseen_pred, s.truth, +1);
        ++i;
      }
    }
    record(inf);
  }

  double best_seen = 0.0, best_unseen = 0.0, best_hm = 0.0;
  for (const auto& p : report.curve) {
    best_seen = std::max(best_seen, p.seen);
    best_unseen = std::max(best_unseen, p.unseen);
    best_hm = std::max(best_hm, harmonic_mean(p.seen, p.unseen));
    report.best_state = std::max(report.best_state, p.state);
    report.best_object = std::max(report.best_object, p.object);
  }
  if (report.seen_samples) report.best_seen = best_seen;
  if (report.unseen_samples) report.best_unseen = best_unseen;
  if (report.seen_samples && report.unseen_samples && has_seen_classes && has_unseen_classes) {
    report.best_hm = best_hm;
    double area = 0.0;
    for (std::size_t j = 1; j < report.curve.size(); ++j) {
      const auto& a = report.curve[j - 1];
      const auto& b = report.curve[j];
      area += (b.unseen - a.unseen) * (a.seen + b.seen) * 0.5;
    }
    report.auc = area;
  }
  return report;
}

}  // namespace prolt
