#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prolt/adam.hpp"
#include "prolt/bundle.hpp"
#include "prolt/classifier.hpp"
#include "prolt/inference.hpp"
#include "prolt/model.hpp"
#include "prolt/priors.hpp"

namespace prolt {

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t stage1_epochs = 50;
  std::size_t stage2_epochs = 1000;
  std::size_t patience = 10;
  double eta = 1.0;
  double temperature = 0.1;
  double dropout = 0.3;
  std::size_t hidden_dim = 1024;
  std::size_t embed_dim = 512;
  std::uint64_t seed = 0;
  // Re-estimate the attribute prior every N stage-2 epochs; 0 keeps it frozen.
  std::size_t prior_refresh = 0;
  PriorMode prior = PriorMode::attribute;
  KForm k_form = KForm::product;
  // Keep updating C_s / C_o with the independent loss during stage 2.
  bool cotrain = false;
  // Restrict stage-2 logits to seen pairs instead of every feasible pair.
  bool seen_classes_only = false;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, 0.9, 0.999, 1e-8}; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_metric = 0.0;  // AUC when defined, otherwise best seen accuracy
  std::optional<double> val_auc;
  std::optional<double> val_hm;
};

struct TrainTrace {
  std::string stage;
  std::vector<EpochRecord> epochs;
  std::size_t chosen_epoch = 0;  // 0 = initialization kept

  // One JSON object per line.
  std::string to_jsonl() const;
};

struct Stage1Result {
  PrototypeClassifier state_clf;
  PrototypeClassifier object_clf;
  TrainTrace trace;
};

struct Stage2Result {
  PrototypeClassifier composition_clf;
  AttributePriorTable prior;
  TrainTrace trace;
  // Updated attribute classifiers when cotrain is set, otherwise copies of the inputs.
  PrototypeClassifier state_clf;
  PrototypeClassifier object_clf;
};

// Trains C_s and C_o on the independent loss with Adam and early-stops on
// validation AUC of p(s|x) p(o|x) composition scores.
Stage1Result train_stage1(const FeatureBundle& bundle, const TrainConfig& cfg);

// Builds the composition prior for `cfg.prior`, trains C_y on the adjusted
// loss and early-stops on validation AUC under `val_inference`.
Stage2Result train_stage2(const FeatureBundle& bundle, const PrototypeClassifier& state_clf,
                          const PrototypeClassifier& object_clf, const TrainConfig& cfg,
                          const InferenceConfig& val_inference);

AttributePriorTable make_prior(PriorMode mode, const FeatureBundle& bundle, const PrototypeClassifier& state_clf,
                               const PrototypeClassifier& object_clf, KForm form);

}  // namespace prolt
