#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "prolt/bundle.hpp"
#include "prolt/inference.hpp"
#include "prolt/metrics.hpp"
#include "prolt/model.hpp"
#include "prolt/training.hpp"

namespace prolt {

// Training plus inference settings for one run.
struct RunConfig {
  TrainConfig train;
  InferenceConfig inference;

  // Unknown keys are rejected. `inference.eta` follows `train.eta`.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Applies one named numeric override, e.g. ("eta", 0.5) or ("lambda", 50).
  void set(const std::string& key, double value);
};

struct TrainedRun {
  Model model;
  TrainTrace stage1;
  TrainTrace stage2;
};

TrainedRun train_model(const FeatureBundle& bundle, const RunConfig& cfg);
// Reuses an already trained stage 1 (it depends only on the data and the seed).
TrainedRun train_model(const FeatureBundle& bundle, const RunConfig& cfg, const Stage1Result& stage1);

EvalReport evaluate_model(const Model& model, const FeatureBundle& bundle, const InferenceConfig& cfg,
                          Split split = Split::test);

nlohmann::json report_to_json(const EvalReport& report);
// bias,seen,unseen,state,object
std::string curve_csv(const EvalReport& report);

struct SweepGrid {
  RunConfig base;
  std::map<std::string, std::vector<double>> axes;
  std::vector<std::uint64_t> seeds;

  static SweepGrid from_json(const nlohmann::json& j);
  std::size_t cells() const;
};

struct SweepRow {
  std::string cell;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

// Trains and evaluates every (cell, seed). A failing cell produces an
// "error" row and the sweep moves on.
std::vector<SweepRow> run_sweep(const FeatureBundle& bundle, const SweepGrid& grid,
                                const std::function<void(const std::string&)>& progress = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace prolt
