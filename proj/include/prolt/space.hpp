#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "prolt/softmax.hpp"

namespace prolt {

struct Composition {
  std::size_t state = 0;
  std::size_t object = 0;
  bool seen = true;

  friend bool operator==(const Composition&, const Composition&) = default;
};

// The label universe Y = Y^S u Y^U over states x objects.
//
// Dense indices put every seen pair first, then every unseen pair; inside
// each block pairs are ordered by (state, object). So [0, num_seen()) is Y^S
// and [num_seen(), size()) is Y^U.
class CompositionSpace {
 public:
  CompositionSpace() = default;

  std::size_t num_states() const { return states_.size(); }
  std::size_t num_objects() const { return objects_.size(); }
  std::size_t size() const { return pairs_.size(); }
  std::size_t num_seen() const { return num_seen_; }
  std::size_t num_unseen() const { return pairs_.size() - num_seen_; }

  const std::vector<std::string>& state_names() const { return states_; }
  const std::vector<std::string>& object_names() const { return objects_; }
  const std::vector<Composition>& pairs() const { return pairs_; }
  const Composition& pair(std::size_t dense) const { return pairs_.at(dense); }
  bool is_seen(std::size_t dense) const { return dense < num_seen_; }

  // Dense index of (s, o), or nullopt when the pair is not feasible.
  std::optional<std::size_t> pair_index(std::size_t state, std::size_t object) const;

  // |S| x |O| row-major feasibility indicator sigma.
  const Mask& feasibility() const { return feasible_; }

  // SHA-256 over the canonical description (names, pairs, flags).
  const std::string& hash() const { return hash_; }

  friend bool operator==(const CompositionSpace& a, const CompositionSpace& b) {
    return a.hash_ == b.hash_;
  }

 private:
  friend CompositionSpace build_space(std::vector<std::string>, std::vector<std::string>,
                                      std::vector<Composition>);

  std::vector<std::string> states_;
  std::vector<std::string> objects_;
  std::vector<Composition> pairs_;
  std::size_t num_seen_ = 0;
  std::vector<std::ptrdiff_t> grid_index_;  // -1 where infeasible
  Mask feasible_;
  std::string hash_;
};

// Validates and indexes a composition space. Throws ValidationError on empty
// state/object lists, out-of-range indices, duplicate pairs, or a state or
// object that occurs in no seen pair.
CompositionSpace build_space(std::vector<std::string> states, std::vector<std::string> objects,
                             std::vector<Composition> pairs);

}  // namespace prolt
