#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "prolt/model.hpp"

namespace prolt {

// Binary checkpoint:
//   8 bytes   magic "PROLTCK1"
//   u32 LE    header length H
//   H bytes   JSON header (space hash, prior mode, eta, lambda, temperatures,
//             layer shapes, prior epoch)
//   payload   float64 LE values: for each network in the order
//             state.embedder, state.prototype, object.embedder,
//             object.prototype, composition.embedder, composition.prototype,
//             every layer's weight (row-major) then bias; followed by the
//             prior vectors p(s), p(o), k.
std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
// Throws ValidationError when the checkpoint was built for another space.
Model load_checkpoint(const std::filesystem::path& path, const std::string& expected_space_hash);

}  // namespace prolt
