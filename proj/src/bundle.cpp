#include "prolt/bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prolt/errors.hpp"
#include "prolt/hashing.hpp"

namespace prolt {
namespace {

using nlohmann::json;

constexpr const char* kMetadataFile = "metadata.json";
constexpr const char* kPayloadFile = "features.bin";
constexpr int kFormatVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::string_view what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ValidationError(std::string(what) + " rows are ragged");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Split split_from_int(int v) {
  if (v < 0 || v > 2) throw ValidationError("split code must be 0 (train), 1 (val) or 2 (test)");
  return static_cast<Split>(v);
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}

// Parses everything except the payload.
FeatureBundle bundle_from_metadata(const json& meta, bool require_semantics) {
  FeatureBundle b;
  try {
    if (meta.contains("format") && meta.at("format") != "prolt-bundle") {
      throw ValidationError("metadata is not a prolt bundle");
    }
    if (meta.contains("version") && meta.at("version").get<int>() != kFormatVersion) {
      throw ValidationError("unsupported bundle version");
    }
    auto states = meta.at("states").get<std::vector<std::string>>();
    auto objects = meta.at("objects").get<std::vector<std::string>>();
    std::vector<Composition> pairs;
    for (const auto& p : meta.at("pairs")) {
      const auto flag = p.at(2).get<std::string>();
      if (flag != "seen" && flag != "unseen") throw ValidationError("pair flag must be 'seen' or 'unseen'");
      pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), flag == "seen"});
    }
    b.space = build_space(std::move(states), std::move(objects), std::move(pairs));
    if (meta.contains("space_hash") && meta.at("space_hash").get<std::string>() != b.space.hash()) {
      throw ValidationError("metadata space_hash does not match its pair list");
    }
    b.dim = meta.at("dim").get<std::size_t>();
    b.provenance = meta.value("provenance", "");
    if (meta.contains("semantics")) {
      b.semantics.states = matrix_from_json(meta.at("semantics").at("states"), "semantics.states");
      b.semantics.objects = matrix_from_json(meta.at("semantics").at("objects"), "semantics.objects");
    } else if (require_semantics) {
      throw ValidationError("metadata has no semantics section");
    }
    const auto& labels = meta.at("labels");
    auto ls = labels.at("state").get<std::vector<std::uint32_t>>();
    auto lo = labels.at("object").get<std::vector<std::uint32_t>>();
    auto sp = meta.at("splits").get<std::vector<int>>();
    if (ls.size() != lo.size() || ls.size() != sp.size()) {
      throw ValidationError("label and split lists have different lengths");
    }
    const std::size_t declared = meta.at("samples").get<std::size_t>();
    if (declared != ls.size()) throw ValidationError("declared sample count differs from label count");
    b.labels.resize(ls.size());
    b.splits.resize(ls.size());
    for (std::size_t i = 0; i < ls.size(); ++i) {
      b.labels[i] = {ls[i], lo[i]};
      b.splits[i] = split_from_int(sp[i]);
    }
    if (meta.contains("biased_pairs")) b.biased_pairs = meta.at("biased_pairs").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed bundle metadata: ") + e.what());
  }
  return b;
}

void load_payload(FeatureBundle& b, const std::string& bytes) {
  const std::size_t expected = b.size() * b.dim * sizeof(float);
  if (bytes.size() != expected) {
    throw ValidationError("feature payload length mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size()));
  }
  b.features.resize(b.size() * b.dim);
  for (std::size_t i = 0; i < b.features.size(); ++i) {
    std::uint32_t raw = 0;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    b.features[i] = std::bit_cast<float>(to_le(raw));
  }
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::size_t FeatureBundle::pair_of(std::size_t sample) const {
  const auto idx = space.pair_index(labels.at(sample).state, labels.at(sample).object);
  if (!idx) throw ValidationError("sample " + std::to_string(sample) + " has an infeasible label");
  return *idx;
}

std::vector<std::size_t> FeatureBundle::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

SplitData select(const FeatureBundle& bundle, Split split) {
  SplitData d;
  d.rows = bundle.indices(split);
  d.features = Matrix(d.rows.size(), bundle.dim);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const std::size_t r = d.rows[i];
    auto dst = d.features.row(i);
    for (std::size_t c = 0; c < bundle.dim; ++c) dst[c] = bundle.features[r * bundle.dim + c];
    d.states.push_back(bundle.labels[r].state);
    d.objects.push_back(bundle.labels[r].object);
    d.pairs.push_back(bundle.pair_of(r));
  }
  return d;
}

void validate_bundle(const FeatureBundle& b) {
  if (b.dim == 0) throw ValidationError("bundle feature dimension must be positive");
  if (b.splits.size() != b.labels.size()) throw ValidationError("one split assignment per sample is required");
  if (b.features.size() != b.size() * b.dim) {
    throw ValidationError("feature payload length mismatch: expected " + std::to_string(b.size() * b.dim) +
                          " values, found " + std::to_string(b.features.size()));
  }
  for (float v : b.features) {
    if (!std::isfinite(v)) throw ValidationError("feature payload contains non-finite values");
  }
  b.semantics.validate(b.space);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t y = b.pair_of(i);
    if (b.splits[i] == Split::train && !b.space.is_seen(y)) {
      throw ValidationError("training sample " + std::to_string(i) + " belongs to an unseen pair");
    }
  }
  for (std::size_t y : b.biased_pairs) {
    if (y >= b.space.size()) throw ValidationError("biased pair index out of range");
  }
}

std::string bundle_metadata(const FeatureBundle& b) {
  json meta;
  meta["format"] = "prolt-bundle";
  meta["version"] = kFormatVersion;
  meta["dim"] = b.dim;
  meta["samples"] = b.size();
  meta["provenance"] = b.provenance;
  meta["states"] = b.space.state_names();
  meta["objects"] = b.space.object_names();
  json pairs = json::array();
  for (const auto& p : b.space.pairs()) pairs.push_back({p.state, p.object, p.seen ? "seen" : "unseen"});
  meta["pairs"] = std::move(pairs);
  meta["space_hash"] = b.space.hash();
  meta["semantics"] = {{"dim", b.semantics.dim()},
                       {"states", matrix_to_json(b.semantics.states)},
                       {"objects", matrix_to_json(b.semantics.objects)}};
  std::vector<std::uint32_t> ls, lo;
  std::vector<int> sp;
  for (std::size_t i = 0; i < b.size(); ++i) {
    ls.push_back(b.labels[i].state);
    lo.push_back(b.labels[i].object);
    sp.push_back(static_cast<int>(b.splits[i]));
  }
  meta["labels"] = {{"state", ls}, {"object", lo}};
  meta["splits"] = sp;
  meta["biased_pairs"] = b.biased_pairs;
  return meta.dump(1) + "\n";
}

std::string bundle_payload(const FeatureBundle& b) {
  std::string bytes(b.features.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < b.features.size(); ++i) {
    const std::uint32_t raw = to_le(std::bit_cast<std::uint32_t>(b.features[i]));
    std::memcpy(bytes.data() + 4 * i, &raw, 4);
  }
  return bytes;
}

std::string bundle_hash(const FeatureBundle& b) {
  return sha256_hex(bundle_metadata(b) + '\0' + bundle_payload(b));
}

void write_bundle(const FeatureBundle& b, const std::filesystem::path& dir) {
  validate_bundle(b);
  std::filesystem::create_directories(dir);
  write_file(dir / kMetadataFile, bundle_metadata(b));
  write_file(dir / kPayloadFile, bundle_payload(b));
}

FeatureBundle read_bundle(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / kMetadataFile));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("bundle metadata is not valid JSON: ") + e.what());
  }
  FeatureBundle b = bundle_from_metadata(meta, true);
  load_payload(b, read_file(dir / kPayloadFile));
  validate_bundle(b);
  return b;
}

SemanticTable random_semantics(std::size_t num_states, std::size_t num_objects, std::size_t dim, Rng& rng) {
  SemanticTable t;
  t.states = Matrix(num_states, dim);
  t.objects = Matrix(num_objects, dim);
  for (double& v : t.states.values()) v = rng.normal();
  for (double& v : t.objects.values()) v = rng.normal();
  return t;
}

FeatureBundle import_bundle(const std::filesystem::path& metadata_path, const std::filesystem::path& features_path,
                            std::size_t semantic_dim, std::uint64_t seed) {
  json meta;
  try {
    meta = json::parse(read_file(metadata_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("import metadata is not valid JSON: ") + e.what());
  }
  FeatureBundle b = bundle_from_metadata(meta, false);
  if (b.semantics.states.empty()) {
    if (semantic_dim == 0) throw ValidationError("import needs a positive semantic dimension");
    Rng rng(seed);
    b.semantics = random_semantics(b.space.num_states(), b.space.num_objects(), semantic_dim, rng);
  }
  load_payload(b, read_file(features_path));
  if (b.provenance.empty()) b.provenance = "imported from " + features_path.filename().string();
  validate_bundle(b);
  return b;
}

}  // namespace prolt
