#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "prolt/bundle.hpp"
#include "prolt/checkpoint.hpp"
#include "prolt/errors.hpp"
#include "prolt/experiment.hpp"
#include "prolt/hashing.hpp"
#include "prolt/synthgen.hpp"

namespace fs = std::filesystem;
using namespace prolt;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("prolt_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(PROLT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const char* kSmallGen = "--states 4 --objects 5 --samples-per-pair 12 --feature-dim 16 --semantic-dim 8 --noise 1";
const char* kSmallTrain = "--hidden 16 --embed 8 --stage1-epochs 4 --stage2-epochs 4 --patience 2 --batch 32";

Mlp linear(const Matrix& w) {
  return Mlp({DenseLayer{w, std::vector<double>(w.rows(), 0.0), Activation::identity, 0.0}});
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

}  // namespace

TEST_CASE("bundle round trip is byte exact") {
  const auto dir = scratch("roundtrip");
  SynthSpec spec;
  spec.bias_strength = 0.4;
  const auto a = generate(spec);
  write_bundle(a, dir / "a");
  const auto b = read_bundle(dir / "a");
  write_bundle(b, dir / "b");
  CHECK(slurp(dir / "a" / "metadata.json") == slurp(dir / "b" / "metadata.json"));
  CHECK(slurp(dir / "a" / "features.bin") == slurp(dir / "b" / "features.bin"));
  CHECK(bundle_hash(a) == bundle_hash(b));
  CHECK(b.space == a.space);
  CHECK(b.biased_pairs == a.biased_pairs);
}

TEST_CASE("payload length mismatch is rejected") {
  const auto dir = scratch("corrupt");
  write_bundle(generate(SynthSpec{}), dir);
  const auto bytes = slurp(dir / "features.bin");
  std::ofstream(dir / "features.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  try {
    read_bundle(dir);
    FAIL("expected a length mismatch");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
  }
  CHECK(cli("eval --data " + dir.string() + " --checkpoint nowhere --out " + (dir / "o").string()) == 1);
}

TEST_CASE("different seeds give different payloads") {
  SynthSpec a, b;
  b.seed = 9;
  CHECK(sha256_hex(bundle_payload(generate(a))) != sha256_hex(bundle_payload(generate(b))));
}

TEST_CASE("import accepts an external feature matrix") {
  const auto dir = scratch("import");
  const auto bundle = generate(SynthSpec{});
  write_bundle(bundle, dir / "src");
  // Strip the semantics so the importer has to draw them.
  auto meta = read_json(dir / "src" / "metadata.json");
  meta.erase("semantics");
  std::ofstream(dir / "meta.json") << meta.dump();
  REQUIRE(cli("import --metadata " + (dir / "meta.json").string() + " --features " +
              (dir / "src" / "features.bin").string() + " --semantic-dim 8 --out " + (dir / "imp").string()) == 0);
  const auto imported = read_bundle(dir / "imp");
  CHECK(imported.features == bundle.features);
  CHECK(imported.semantics.dim() == 8);
  CHECK(imported.space == bundle.space);
}

TEST_CASE("checkpoint round trip and space binding") {
  SynthSpec spec;
  spec.num_states = 4;
  spec.num_objects = 4;
  spec.feature_dim = 12;
  spec.semantic_dim = 6;
  const auto bundle = generate(spec);
  RunConfig cfg;
  cfg.train.hidden_dim = 8;
  cfg.train.embed_dim = 4;
  cfg.train.stage1_epochs = 2;
  cfg.train.stage2_epochs = 2;
  const auto run = train_model(bundle, cfg);
  const auto bytes = serialize_checkpoint(run.model);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.prior == run.model.prior);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), ValidationError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), ValidationError);
  CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint"), ValidationError);

  const auto dir = scratch("ckpt");
  save_checkpoint(run.model, dir / "m.bin");
  CHECK_NOTHROW(load_checkpoint(dir / "m.bin", bundle.space.hash()));
  spec.seed = 5;
  const auto other = generate(spec);
  REQUIRE(other.space.hash() != bundle.space.hash());
  CHECK_THROWS_AS(load_checkpoint(dir / "m.bin", other.space.hash()), ValidationError);
}

TEST_CASE("train and eval through the command line") {
  const auto dir = scratch("train");
  const std::string data = (dir / "data").string();
  REQUIRE(cli("generate --out " + data + " " + kSmallGen + " --bias-strength 0.6") == 0);
  REQUIRE(cli("train --data " + data + " --out " + (dir / "r1").string() + " " + kSmallTrain) == 0);
  REQUIRE(cli("train --data " + data + " --out " + (dir / "r2").string() + " " + kSmallTrain) == 0);
  for (const char* f : {"checkpoint.bin", "trace.jsonl", "priors.json", "val_report.json", "config.json"}) {
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
  }

  const std::string ckpt = (dir / "r1" / "checkpoint.bin").string();
  const auto before = slurp(ckpt);
  REQUIRE(cli("eval --data " + data + " --checkpoint " + ckpt + " --out " + (dir / "e1").string()) == 0);
  REQUIRE(cli("eval --data " + data + " --checkpoint " + ckpt + " --no-prior --out " + (dir / "e2").string()) == 0);
  REQUIRE(cli("eval --data " + data + " --checkpoint " + ckpt + " --ensemble --delta 0.5 --out " +
              (dir / "e3").string()) == 0);
  CHECK(slurp(ckpt) == before);
  const auto r1 = read_json(dir / "e1" / "report.json"), r2 = read_json(dir / "e2" / "report.json");
  CHECK(r1["inference_prior"] == true);
  CHECK(r2["inference_prior"] == false);
  CHECK(slurp(dir / "e1" / "curve.csv").rfind("bias,seen,unseen,state,object\n", 0) == 0);

  // Baseline checkpoint for the eta = 0 ablation.
  REQUIRE(cli("train --data " + data + " --out " + (dir / "base").string() + " " + kSmallTrain +
              " --prior none --eta 0") == 0);
  const auto priors = read_json(dir / "base" / "priors.json");
  CHECK(priors["mode"] == "none");

  // A bundle from another space is refused.
  const std::string other = (dir / "other").string();
  REQUIRE(cli("generate --out " + other + " " + kSmallGen + " --seed 3") == 0);
  CHECK(cli("eval --data " + other + " --checkpoint " + ckpt + " --out " + (dir / "e4").string()) == 1);
  // Bad configuration is a validation error before any training.
  CHECK(cli("train --data " + data + " --out " + (dir / "bad").string() + " --prior sometimes") == 1);
  std::ofstream(dir / "bad.json") << R"({"learning_rate": 0.001, "colour": "blue"})";
  CHECK(cli("train --data " + data + " --out " + (dir / "bad").string() + " --config " +
            (dir / "bad.json").string()) == 1);
  CHECK(cli("train --data " + (dir / "missing").string() + " --out " + (dir / "bad").string()) == 1);
}

TEST_CASE("a perfect checkpoint scores 1 everywhere") {
  // States and objects get one-hot semantics in a shared 5-dim space and
  // features are their sum, so slicing linear maps make an exact classifier.
  const auto space = build_space({"a", "b", "c"}, {"x", "y"},
                                 {{0, 0, true}, {1, 1, true}, {2, 0, true}, {0, 1, false}, {2, 1, false}});
  FeatureBundle b;
  b.space = space;
  Matrix state_sem(3, 5), object_sem(2, 5);
  for (int i = 0; i < 3; ++i) state_sem(i, i) = 1;
  for (int i = 0; i < 2; ++i) object_sem(i, 3 + i) = 1;
  b.semantics = {state_sem, object_sem};
  b.dim = 5;
  for (std::size_t y = 0; y < space.size(); ++y) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto& p = space.pair(y);
      std::vector<float> row(5, 0.0f);
      row[p.state] = 1.0f;
      row[3 + p.object] = 1.0f;
      b.features.insert(b.features.end(), row.begin(), row.end());
      b.labels.push_back({static_cast<std::uint32_t>(p.state), static_cast<std::uint32_t>(p.object)});
      b.splits.push_back(p.seen && rep == 0 ? Split::train : (rep == 1 ? Split::val : Split::test));
    }
  }
  validate_bundle(b);

  Matrix state_slice(3, 5), object_slice(2, 5);
  for (int i = 0; i < 3; ++i) state_slice(i, i) = 1;
  for (int i = 0; i < 2; ++i) object_slice(i, 3 + i) = 1;
  Model m;
  m.space_hash = space.hash();
  Matrix merge(5, 10);
  for (int i = 0; i < 5; ++i) merge(i, i) = merge(i, 5 + i) = 1;
  m.state_clf = PrototypeClassifier(linear(state_slice), linear(state_slice), 0.1);
  m.object_clf = PrototypeClassifier(linear(object_slice), linear(object_slice), 0.1);
  m.composition_clf = PrototypeClassifier(linear(identity(5)), linear(merge), 0.1);
  m.prior.k.assign(space.size(), 1.0 / space.size());
  m.prior.state_prior.assign(3, 1.0 / 3);
  m.prior.object_prior.assign(2, 0.5);

  const auto dir = scratch("perfect");
  write_bundle(b, dir / "data");
  save_checkpoint(m, dir / "m.bin");
  for (const char* flags : {"", "--no-prior", "--ensemble"}) {
    REQUIRE(cli("eval --data " + (dir / "data").string() + " --checkpoint " + (dir / "m.bin").string() +
                " --out " + (dir / "e").string() + " " + flags) == 0);
    const auto r = read_json(dir / "e" / "report.json");
    for (const char* k : {"auc", "best_hm", "best_seen", "best_unseen", "best_state", "best_object"})
      CHECK(r[k].get<double>() == doctest::Approx(1.0));
  }
}

TEST_CASE("sweep") {
  const auto dir = scratch("sweep");
  const std::string data = (dir / "data").string();
  REQUIRE(cli("generate --out " + data + " " + kSmallGen + " --bias-strength 0.6") == 0);
  const nlohmann::json base = {{"hidden_dim", 16}, {"embed_dim", 8},  {"stage1_epochs", 4},
                               {"stage2_epochs", 4}, {"patience", 2}, {"batch_size", 32}};

  SUBCASE("a 1x1 grid equals a single train and eval") {
    nlohmann::json grid = {{"base", base}, {"grid", {{"eta", {1.0}}}}, {"seeds", {0}}};
    std::ofstream(dir / "g1.json") << grid.dump();
    REQUIRE(cli("sweep --data " + data + " --grid " + (dir / "g1.json").string() + " --out " +
                (dir / "s1.csv").string()) == 0);
    REQUIRE(cli("train --data " + data + " --out " + (dir / "t").string() + " " + kSmallTrain) == 0);
    REQUIRE(cli("eval --data " + data + " --checkpoint " + (dir / "t" / "checkpoint.bin").string() + " --out " +
                (dir / "e").string()) == 0);
    const auto report = read_json(dir / "e" / "report.json");
    std::istringstream csv(slurp(dir / "s1.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "cell,seed,metric,value");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
      const auto c2 = line.find(',', line.find(',', line.find("\",") + 2) + 1);
      const auto c1 = line.rfind(',', c2 - 1);
      const std::string metric = line.substr(c1 + 1, c2 - c1 - 1);
      const double value = std::stod(line.substr(c2 + 1));
      CHECK(value == doctest::Approx(report[metric].get<double>()).epsilon(1e-12));
      ++rows;
    }
    CHECK(rows == 6);
  }

  SUBCASE("eta grid times three seeds") {
    nlohmann::json grid = {{"base", base}, {"grid", {{"eta", {0.0, 0.5, 1.0}}}}, {"seeds", {0, 1, 2}}};
    std::ofstream(dir / "g2.json") << grid.dump();
    REQUIRE(cli("sweep --data " + data + " --grid " + (dir / "g2.json").string() + " --out " +
                (dir / "s2.csv").string()) == 0);
    std::map<std::string, int> per_metric;
    std::istringstream csv(slurp(dir / "s2.csv"));
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      const auto c2 = line.rfind(',');
      const auto c1 = line.rfind(',', c2 - 1);
      ++per_metric[line.substr(c1 + 1, c2 - c1 - 1)];
    }
    CHECK(per_metric.size() == 6);
    for (const auto& [metric, n] : per_metric) CHECK(n == 9);
  }

  SUBCASE("a failing cell is recorded and the sweep continues") {
    nlohmann::json grid = {{"base", base}, {"grid", {{"temperature", {-1.0, 0.1}}}}, {"seeds", {0}}};
    std::ofstream(dir / "g3.json") << grid.dump();
    // Grid validation probes the first value only; the bad cell fails at run time.
    grid["grid"]["temperature"] = {0.1, -1.0};
    std::ofstream(dir / "g3.json") << grid.dump();
    REQUIRE(cli("sweep --data " + data + " --grid " + (dir / "g3.json").string() + " --out " +
                (dir / "s3.csv").string()) == 0);
    const auto text = slurp(dir / "s3.csv");
    CHECK(text.find(",error,") != std::string::npos);
    CHECK(text.find(",auc,") != std::string::npos);
  }

  SUBCASE("empty grids are rejected") {
    nlohmann::json grid = {{"base", base}, {"grid", {{"eta", nlohmann::json::array()}}}};
    std::ofstream(dir / "g4.json") << grid.dump();
    CHECK(cli("sweep --data " + data + " --grid " + (dir / "g4.json").string() + " --out " +
              (dir / "s4.csv").string()) == 1);
  }
}

TEST_CASE("unseen accuracy varies smoothly over a lambda grid") {
  const auto dir = scratch("lambda");
  const std::string data = (dir / "data").string();
  REQUIRE(cli("generate --out " + data + " --states 6 --objects 6 --samples-per-pair 30 --feature-dim 32 " +
              "--semantic-dim 8 --noise 1.5 --bias-strength 0.6") == 0);
  nlohmann::json grid = {{"base",
                          {{"hidden_dim", 64},
                           {"embed_dim", 32},
                           {"stage1_epochs", 15},
                           {"stage2_epochs", 30},
                           {"temperature", 0.2},
                           {"learning_rate", 2e-3}}},
                         {"grid", {{"lambda", {1.0, 5.0, 10.0, 20.0, 35.0, 50.0}}}},
                         {"seeds", {0}}};
  std::ofstream(dir / "g.json") << grid.dump();
  REQUIRE(cli("sweep --data " + data + " --grid " + (dir / "g.json").string() + " --out " +
              (dir / "s.csv").string()) == 0);
  std::vector<double> unseen;
  std::istringstream csv(slurp(dir / "s.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line))
    if (line.find(",best_unseen,") != std::string::npos) unseen.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  REQUIRE(unseen.size() == 6);
  for (std::size_t i = 1; i < unseen.size(); ++i) {
    MESSAGE("lambda cell " << i << " unseen " << unseen[i]);
    CHECK(std::abs(unseen[i] - unseen[i - 1]) <= 0.10);
  }
}

TEST_CASE("gradcheck command passes") { CHECK(cli("gradcheck --instances 5") == 0); }
