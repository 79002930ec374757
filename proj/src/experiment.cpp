#include "prolt/experiment.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "prolt/errors.hpp"

namespace prolt {
namespace {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "adjusted") return ScoreMode::adjusted;
  if (s == "ensemble") return ScoreMode::ensemble;
  throw ValidationError("unknown score mode '" + s + "' (expected adjusted or ensemble)");
}

}  // namespace

const char* to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::attribute: return "attribute";
    case PriorMode::class_frequency: return "class_frequency";
    case PriorMode::none: return "none";
  }
  return "?";
}

PriorMode prior_mode_from_string(const std::string& name) {
  if (name == "attribute") return PriorMode::attribute;
  if (name == "class_frequency") return PriorMode::class_frequency;
  if (name == "none") return PriorMode::none;
  throw ValidationError("unknown prior mode '" + name + "' (expected attribute, class_frequency or none)");
}

const char* to_string(KForm form) { return form == KForm::product ? "product" : "log_product"; }

KForm k_form_from_string(const std::string& name) {
  if (name == "product") return KForm::product;
  if (name == "log_product") return KForm::log_product;
  throw ValidationError("unknown k form '" + name + "' (expected product or log_product)");
}

RunConfig RunConfig::from_json(const json& j) {
  static const std::set<std::string> known = {
      "learning_rate", "batch_size", "stage1_epochs", "stage2_epochs", "patience",   "eta",
      "lambda",        "temperature", "dropout",      "hidden_dim",    "embed_dim",  "seed",
      "prior_refresh", "prior",       "k_form",       "cotrain",       "seen_classes_only",
      "inference_prior", "score_mode", "delta"};
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    auto& t = c.train;
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.stage1_epochs = j.value("stage1_epochs", t.stage1_epochs);
    t.stage2_epochs = j.value("stage2_epochs", t.stage2_epochs);
    t.patience = j.value("patience", t.patience);
    t.eta = j.value("eta", t.eta);
    t.temperature = j.value("temperature", t.temperature);
    t.dropout = j.value("dropout", t.dropout);
    t.hidden_dim = j.value("hidden_dim", t.hidden_dim);
    t.embed_dim = j.value("embed_dim", t.embed_dim);
    t.seed = j.value("seed", t.seed);
    t.prior_refresh = j.value("prior_refresh", t.prior_refresh);
    if (j.contains("prior")) t.prior = prior_mode_from_string(j.at("prior").get<std::string>());
    if (j.contains("k_form")) t.k_form = k_form_from_string(j.at("k_form").get<std::string>());
    t.cotrain = j.value("cotrain", t.cotrain);
    t.seen_classes_only = j.value("seen_classes_only", t.seen_classes_only);
    auto& inf = c.inference;
    inf.lambda = j.value("lambda", inf.lambda);
    inf.use_prior = j.value("inference_prior", inf.use_prior);
    if (j.contains("score_mode")) inf.mode = score_mode_from_string(j.at("score_mode").get<std::string>());
    inf.delta = j.value("delta", inf.delta);
    inf.eta = t.eta;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad run config: ") + e.what());
  }
  c.train.validate();
  if (!(c.inference.lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (!(c.inference.delta >= 0.0 && c.inference.delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  return c;
}

json RunConfig::to_json() const {
  const auto& t = train;
  json j;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["stage1_epochs"] = t.stage1_epochs;
  j["stage2_epochs"] = t.stage2_epochs;
  j["patience"] = t.patience;
  j["eta"] = t.eta;
  j["temperature"] = t.temperature;
  j["dropout"] = t.dropout;
  j["hidden_dim"] = t.hidden_dim;
  j["embed_dim"] = t.embed_dim;
  j["seed"] = t.seed;
  j["prior_refresh"] = t.prior_refresh;
  j["prior"] = to_string(t.prior);
  j["k_form"] = to_string(t.k_form);
  j["cotrain"] = t.cotrain;
  j["seen_classes_only"] = t.seen_classes_only;
  j["lambda"] = inference.lambda;
  j["inference_prior"] = inference.use_prior;
  j["score_mode"] = inference.mode == ScoreMode::adjusted ? "adjusted" : "ensemble";
  j["delta"] = inference.delta;
  return j;
}

void RunConfig::set(const std::string& key, double value) {
  json j = to_json();
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError("'" + key + "' is not a numeric config key");
  }
  if (j.at(key).is_number_unsigned() || j.at(key).is_number_integer()) {
    if (value < 0 || std::floor(value) != value) throw ValidationError("'" + key + "' needs a whole number");
    j[key] = static_cast<std::uint64_t>(value);
  } else {
    j[key] = value;
  }
  *this = from_json(j);
}

TrainedRun train_model(const FeatureBundle& bundle, const RunConfig& cfg) {
  return train_model(bundle, cfg, train_stage1(bundle, cfg.train));
}

TrainedRun train_model(const FeatureBundle& bundle, const RunConfig& cfg, const Stage1Result& stage1) {
  auto stage2 = train_stage2(bundle, stage1.state_clf, stage1.object_clf, cfg.train, cfg.inference);
  TrainedRun run;
  run.model.space_hash = bundle.space.hash();
  run.model.state_clf = std::move(stage2.state_clf);
  run.model.object_clf = std::move(stage2.object_clf);
  run.model.composition_clf = std::move(stage2.composition_clf);
  run.model.prior = std::move(stage2.prior);
  run.model.prior_mode = cfg.train.prior;
  run.model.k_form = cfg.train.k_form;
  run.model.eta = cfg.train.eta;
  run.model.lambda = cfg.inference.lambda;
  run.stage1 = stage1.trace;
  run.stage2 = std::move(stage2.trace);
  return run;
}

EvalReport evaluate_model(const Model& model, const FeatureBundle& bundle, const InferenceConfig& cfg,
                          Split split) {
  const auto data = select(bundle, split);
  if (data.size() == 0) throw ValidationError(std::string(to_string(split)) + " split is empty");
  const Matrix scores = score(model, data.features, bundle.semantics, bundle.space, cfg);
  return bias_sweep(scores, data.pairs, bundle.space);
}

json report_to_json(const EvalReport& r) {
  json j;
  j["best_seen"] = optional_json(r.best_seen);
  j["best_unseen"] = optional_json(r.best_unseen);
  j["best_hm"] = optional_json(r.best_hm);
  j["auc"] = optional_json(r.auc);
  j["auc_defined"] = r.auc.has_value();
  j["best_state"] = r.best_state;
  j["best_object"] = r.best_object;
  j["seen_samples"] = r.seen_samples;
  j["unseen_samples"] = r.unseen_samples;
  j["curve_points"] = r.curve.size();
  return j;
}

std::string curve_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "bias,seen,unseen,state,object\n";
  for (const auto& p : r.curve) {
    out << format_double(p.bias) << ',' << format_double(p.seen) << ',' << format_double(p.unseen) << ','
        << format_double(p.state) << ',' << format_double(p.object) << '\n';
  }
  return out.str();
}

SweepGrid SweepGrid::from_json(const json& j) {
  SweepGrid g;
  try {
    g.base = RunConfig::from_json(j.value("base", json::object()));
    const json axes = j.value("grid", json::object());
    for (const auto& [key, values] : axes.items()) {
      auto v = values.get<std::vector<double>>();
      if (v.empty()) throw ValidationError("grid axis '" + key + "' is empty");
      RunConfig probe = g.base;
      probe.set(key, v.front());
      g.axes[key] = std::move(v);
    }
    g.seeds = j.value("seeds", std::vector<std::uint64_t>{g.base.train.seed});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad sweep grid: ") + e.what());
  }
  if (g.seeds.empty()) throw ValidationError("sweep needs at least one seed");
  return g;
}

std::size_t SweepGrid::cells() const {
  std::size_t n = 1;
  for (const auto& [_, v] : axes) n *= v.size();
  return n;
}

std::vector<SweepRow> run_sweep(const FeatureBundle& bundle, const SweepGrid& grid,
                                const std::function<void(const std::string&)>& progress) {
  std::vector<SweepRow> rows;
  std::vector<std::pair<std::string, const std::vector<double>*>> axes;
  for (const auto& [k, v] : grid.axes) axes.emplace_back(k, &v);

  for (std::size_t cell = 0; cell < grid.cells(); ++cell) {
    RunConfig cfg = grid.base;
    std::string label;
    std::size_t rem = cell;
    bool ok = true;
    std::string error;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      const auto& values = *it->second;
      const double v = values[rem % values.size()];
      rem /= values.size();
      label = it->first + "=" + format_double(v) + (label.empty() ? "" : ";") + label;
      try {
        cfg.set(it->first, v);
      } catch (const std::exception& e) {
        ok = false;
        error = e.what();
      }
    }
    if (label.empty()) label = "base";
    for (std::uint64_t seed : grid.seeds) {
      if (progress) progress(label + " seed=" + std::to_string(seed));
      if (!ok) {
        rows.push_back({label, seed, "error", 1.0});
        continue;
      }
      cfg.train.seed = seed;
      try {
        const auto run = train_model(bundle, cfg);
        InferenceConfig inf = cfg.inference;
        inf.eta = cfg.train.eta;
        const auto r = evaluate_model(run.model, bundle, inf);
        auto push = [&](const char* metric, const std::optional<double>& v) {
          rows.push_back({label, seed, metric, v ? *v : std::nan("")});
        };
        push("auc", r.auc);
        push("best_hm", r.best_hm);
        push("best_seen", r.best_seen);
        push("best_unseen", r.best_unseen);
        push("best_state", r.best_state);
        push("best_object", r.best_object);
      } catch (const std::exception& e) {
        if (progress) progress(std::string("  failed: ") + e.what());
        rows.push_back({label, seed, "error", 1.0});
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "cell,seed,metric,value\n";
  for (const auto& r : rows) {
    out << '"' << r.cell << '"' << ',' << r.seed << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
  return out.str();
}

}  // namespace prolt
