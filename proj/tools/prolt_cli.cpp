#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prolt/bundle.hpp"
#include "prolt/checkpoint.hpp"
#include "prolt/diagnostics.hpp"
#include "prolt/errors.hpp"
#include "prolt/experiment.hpp"
#include "prolt/gradcheck.hpp"
#include "prolt/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prolt;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + s + "'");
}

struct GenerateArgs {
  fs::path out;
  SynthSpec spec;
};

struct TrainArgs {
  fs::path data, out, config;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta, lambda, temperature, lr, dropout;
  std::optional<std::size_t> stage1_epochs, stage2_epochs, patience, hidden, embed, batch;
  std::optional<std::string> prior, k_form;
  std::optional<std::size_t> prior_refresh;
  bool cotrain = false;
  bool seen_classes_only = false;
};

struct EvalArgs {
  fs::path data, checkpoint, out;
  std::string split = "test";
  bool no_prior = false;
  bool ensemble = false;
  double delta = 0.5;
  std::optional<double> eta, lambda;
};

int run_generate(const GenerateArgs& a) {
  const auto bundle = generate(a.spec);
  write_bundle(bundle, a.out);
  std::cout << "wrote " << bundle.size() << " samples, " << bundle.space.size() << " pairs ("
            << bundle.space.num_unseen() << " unseen) to " << a.out << "\nbundle sha256 " << bundle_hash(bundle)
            << '\n';
  return 0;
}

RunConfig build_run_config(const TrainArgs& a) {
  json j = a.config.empty() ? json::object() : read_json(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (a.eta) j["eta"] = *a.eta;
  if (a.lambda) j["lambda"] = *a.lambda;
  if (a.temperature) j["temperature"] = *a.temperature;
  if (a.lr) j["learning_rate"] = *a.lr;
  if (a.dropout) j["dropout"] = *a.dropout;
  if (a.stage1_epochs) j["stage1_epochs"] = *a.stage1_epochs;
  if (a.stage2_epochs) j["stage2_epochs"] = *a.stage2_epochs;
  if (a.patience) j["patience"] = *a.patience;
  if (a.hidden) j["hidden_dim"] = *a.hidden;
  if (a.embed) j["embed_dim"] = *a.embed;
  if (a.batch) j["batch_size"] = *a.batch;
  if (a.prior) j["prior"] = *a.prior;
  if (a.k_form) j["k_form"] = *a.k_form;
  if (a.prior_refresh) j["prior_refresh"] = *a.prior_refresh;
  if (a.cotrain) j["cotrain"] = true;
  if (a.seen_classes_only) j["seen_classes_only"] = true;
  return RunConfig::from_json(j);
}

json prior_json(const Model& m, const CompositionSpace& space) {
  json j;
  j["mode"] = to_string(m.prior_mode);
  j["k_form"] = to_string(m.k_form);
  j["epoch"] = m.prior.epoch;
  j["state_prior"] = m.prior.state_prior;
  j["object_prior"] = m.prior.object_prior;
  json pairs = json::array();
  for (std::size_t y = 0; y < space.size(); ++y) {
    const auto& c = space.pair(y);
    pairs.push_back({{"state", space.state_names()[c.state]},
                     {"object", space.object_names()[c.object]},
                     {"seen", c.seen},
                     {"k", m.prior.k[y]}});
  }
  j["pairs"] = pairs;
  return j;
}

int run_train(const TrainArgs& a) {
  const RunConfig cfg = build_run_config(a);
  const auto bundle = read_bundle(a.data);
  const auto run = train_model(bundle, cfg);
  fs::create_directories(a.out);
  save_checkpoint(run.model, a.out / "checkpoint.bin");
  write_text(a.out / "trace.jsonl", run.stage1.to_jsonl() + run.stage2.to_jsonl());
  write_text(a.out / "priors.json", prior_json(run.model, bundle.space).dump(2) + "\n");
  write_text(a.out / "config.json", cfg.to_json().dump(2) + "\n");
  InferenceConfig inf = cfg.inference;
  const auto report = evaluate_model(run.model, bundle, inf, Split::val);
  write_text(a.out / "val_report.json", report_to_json(report).dump(2) + "\n");
  std::cout << "stage 1 kept epoch " << run.stage1.chosen_epoch << ", stage 2 kept epoch "
            << run.stage2.chosen_epoch << "\nval: " << report_to_json(report).dump() << '\n';
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto bundle = read_bundle(a.data);
  const Model model = load_checkpoint(a.checkpoint, bundle.space.hash());
  InferenceConfig cfg;
  cfg.mode = a.ensemble ? ScoreMode::ensemble : ScoreMode::adjusted;
  cfg.use_prior = !a.no_prior;
  cfg.eta = a.eta.value_or(model.eta);
  cfg.lambda = a.lambda.value_or(model.lambda);
  cfg.delta = a.delta;
  if (!(cfg.lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  const auto report = evaluate_model(model, bundle, cfg, split_from_string(a.split));
  json j = report_to_json(report);
  j["split"] = a.split;
  j["score_mode"] = a.ensemble ? "ensemble" : "adjusted";
  j["inference_prior"] = cfg.use_prior;
  j["eta"] = cfg.eta;
  j["lambda"] = cfg.lambda;
  if (a.ensemble) j["delta"] = cfg.delta;
  fs::create_directories(a.out);
  write_text(a.out / "report.json", j.dump(2) + "\n");
  write_text(a.out / "curve.csv", curve_csv(report));
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-prior logit adjustment for compositional zero-shot learning"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic feature bundle");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.spec.seed);
  g->add_option("--states", gen.spec.num_states);
  g->add_option("--objects", gen.spec.num_objects);
  g->add_option("--pair-density", gen.spec.pair_density);
  g->add_option("--unseen-fraction", gen.spec.unseen_fraction);
  g->add_option("--samples-per-pair", gen.spec.samples_per_pair);
  g->add_option("--count-ratio", gen.spec.count_ratio);
  g->add_option("--feature-dim", gen.spec.feature_dim);
  g->add_option("--semantic-dim", gen.spec.semantic_dim);
  g->add_option("--noise", gen.spec.noise);
  g->add_option("--bias-strength", gen.spec.bias_strength);
  g->add_option("--biased-fraction", gen.spec.biased_pair_fraction);
  g->add_option("--interaction", gen.spec.interaction);
  g->add_option("--train-fraction", gen.spec.train_fraction);
  g->add_option("--val-fraction", gen.spec.val_fraction);

  fs::path imp_meta, imp_features, imp_out;
  std::size_t imp_dim = 16;
  std::uint64_t imp_seed = 0;
  auto* im = app.add_subcommand("import", "Convert external features into a bundle");
  im->add_option("--metadata", imp_meta, "Bundle metadata JSON")->required();
  im->add_option("--features", imp_features, "Raw float32 little-endian feature matrix")->required();
  im->add_option("--semantic-dim", imp_dim, "Size of generated word vectors when the metadata has none");
  im->add_option("--seed", imp_seed);
  im->add_option("--out", imp_out)->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the attribute and composition classifiers");
  t->add_option("--data", tr.data, "Bundle directory")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--seed", tr.seed);
  t->add_option("--eta", tr.eta);
  t->add_option("--lambda", tr.lambda);
  t->add_option("--temperature", tr.temperature);
  t->add_option("--lr", tr.lr);
  t->add_option("--dropout", tr.dropout);
  t->add_option("--stage1-epochs", tr.stage1_epochs);
  t->add_option("--stage2-epochs", tr.stage2_epochs);
  t->add_option("--patience", tr.patience);
  t->add_option("--hidden", tr.hidden);
  t->add_option("--embed", tr.embed);
  t->add_option("--batch", tr.batch);
  t->add_option("--prior", tr.prior, "attribute | class_frequency | none");
  t->add_option("--k-form", tr.k_form, "product | log_product");
  t->add_option("--prior-refresh", tr.prior_refresh, "Re-estimate the attribute prior every N stage-2 epochs");
  t->add_flag("--cotrain", tr.cotrain, "Keep training the attribute classifiers during stage 2");
  t->add_flag("--seen-classes-only", tr.seen_classes_only, "Stage-2 softmax over seen pairs only");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a bundle split with a checkpoint");
  e->add_option("--data", ev.data)->required();
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--out", ev.out)->required();
  e->add_option("--split", ev.split, "train | val | test");
  e->add_flag("--no-prior", ev.no_prior, "Drop the inference prior");
  e->add_flag("--ensemble", ev.ensemble, "Score with the posterior ensemble instead");
  e->add_option("--delta", ev.delta, "Ensemble weight of the composition posterior");
  e->add_option("--eta", ev.eta);
  e->add_option("--lambda", ev.lambda);

  fs::path sw_data, sw_grid, sw_out;
  auto* s = app.add_subcommand("sweep", "Train and evaluate over a hyper-parameter grid");
  s->add_option("--data", sw_data)->required();
  s->add_option("--grid", sw_grid, "Grid JSON: {base, grid: {key: [values]}, seeds}")->required();
  s->add_option("--out", sw_out, "Long-format CSV")->required();

  GradcheckOptions gc;
  auto* gcmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gcmd->add_option("--instances", gc.instances);
  gcmd->add_option("--seed", gc.seed);
  gcmd->add_option("--tolerance", gc.tolerance);
  gcmd->add_option("--width", gc.width);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*g) return run_generate(gen);
    if (*im) {
      const auto bundle = import_bundle(imp_meta, imp_features, imp_dim, imp_seed);
      write_bundle(bundle, imp_out);
      std::cout << "imported " << bundle.size() << " samples\nbundle sha256 " << bundle_hash(bundle) << '\n';
      return 0;
    }
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*s) {
      const auto grid = SweepGrid::from_json(read_json(sw_grid));
      const auto bundle = read_bundle(sw_data);
      const auto rows = run_sweep(bundle, grid, [](const std::string& m) { std::cerr << m << '\n'; });
      write_text(sw_out, sweep_csv(rows));
      std::size_t failures = 0;
      for (const auto& r : rows) failures += r.metric == "error";
      std::cout << rows.size() << " rows written to " << sw_out << " (" << failures << " failed runs)\n";
      return 0;
    }
    if (*gcmd) {
      const auto start = std::chrono::steady_clock::now();
      const auto cases = run_gradcheck(gc);
      bool ok = true;
      double worst = 0.0;
      for (const auto& c : cases) {
        std::printf("%-18s instance %3zu  rel_err %.3e  %s\n", c.name.c_str(), c.instance, c.max_rel_error,
                    c.passed ? "ok" : "FAIL");
        ok = ok && c.passed;
        worst = std::max(worst, c.max_rel_error);
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("%zu cases, worst %.3e, %.2f s\n", cases.size(), worst, secs);
      return ok ? 0 : 2;
    }
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
