#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prolt/classifier.hpp"
#include "prolt/matrix.hpp"
#include "prolt/space.hpp"

namespace prolt {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

const char* to_string(Split split);

struct SampleLabel {
  std::uint32_t state = 0;
  std::uint32_t object = 0;

  friend bool operator==(const SampleLabel&, const SampleLabel&) = default;
};

// A dataset on disk: the composition space, semantic vectors, per-sample
// labels and splits, plus a float32 feature payload (one row per sample).
//
// Directory layout:
//   metadata.json  structured description (see README)
//   features.bin   samples x dim float32, little-endian, row-major
struct FeatureBundle {
  CompositionSpace space;
  SemanticTable semantics;
  std::size_t dim = 0;
  std::vector<float> features;
  std::vector<SampleLabel> labels;
  std::vector<Split> splits;
  std::string provenance;
  // Dense indices of pairs generated with visual bias (synthetic data only).
  std::vector<std::size_t> biased_pairs;

  std::size_t size() const { return labels.size(); }
  std::size_t pair_of(std::size_t sample) const;
  std::vector<std::size_t> indices(Split split) const;
};

// Feature rows and labels for one split, in bundle order.
struct SplitData {
  Matrix features;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> states;
  std::vector<std::size_t> objects;
  std::vector<std::size_t> pairs;

  std::size_t size() const { return rows.size(); }
};

SplitData select(const FeatureBundle& bundle, Split split);

// Throws ValidationError when a bundle invariant is broken: payload length,
// infeasible labels, unseen pairs in the training split, bad semantics.
void validate_bundle(const FeatureBundle& bundle);

std::string bundle_metadata(const FeatureBundle& bundle);
std::string bundle_payload(const FeatureBundle& bundle);
// SHA-256 over metadata and payload bytes.
std::string bundle_hash(const FeatureBundle& bundle);

void write_bundle(const FeatureBundle& bundle, const std::filesystem::path& dir);
FeatureBundle read_bundle(const std::filesystem::path& dir);

// Builds a bundle from a metadata document and a raw float32 file produced
// elsewhere (any encoder). Missing semantic vectors are drawn from `seed`.
FeatureBundle import_bundle(const std::filesystem::path& metadata_path, const std::filesystem::path& features_path,
                            std::size_t semantic_dim, std::uint64_t seed);

// Seeded Gaussian word vectors, one per state and object.
SemanticTable random_semantics(std::size_t num_states, std::size_t num_objects, std::size_t dim, Rng& rng);

}  // namespace prolt
