#pragma once

#include <cstdint>
#include <string>

#include "prolt/classifier.hpp"
#include "prolt/priors.hpp"

namespace prolt {

// Source of the composition prior k used by the adjusted loss and inference.
//   attribute:       estimated from C_s / C_o posteriors
//   class_frequency: smoothed training-set class counts
//   none:            uniform k and no inference prior
enum class PriorMode : std::uint8_t { attribute = 0, class_frequency = 1, none = 2 };

const char* to_string(PriorMode mode);
PriorMode prior_mode_from_string(const std::string& name);
const char* to_string(KForm form);
KForm k_form_from_string(const std::string& name);

// Everything needed to score a bundle that shares the same composition space.
struct Model {
  std::string space_hash;
  PrototypeClassifier state_clf;
  PrototypeClassifier object_clf;
  PrototypeClassifier composition_clf;
  AttributePriorTable prior;
  PriorMode prior_mode = PriorMode::attribute;
  KForm k_form = KForm::product;
  double eta = 1.0;
  double lambda = 10.0;
};

}  // namespace prolt
