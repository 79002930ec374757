#include "prolt/space.hpp"

#include <algorithm>
#include <sstream>

#include "prolt/errors.hpp"
#include "prolt/hashing.hpp"

namespace prolt {

CompositionSpace build_space(std::vector<std::string> states, std::vector<std::string> objects,
                             std::vector<Composition> pairs) {
  if (states.empty()) throw ValidationError("composition space needs at least one state");
  if (objects.empty()) throw ValidationError("composition space needs at least one object");
  if (pairs.empty()) throw ValidationError("composition space needs at least one pair");

  const std::size_t ns = states.size();
  const std::size_t no = objects.size();
  std::vector<std::ptrdiff_t> grid(ns * no, -1);
  std::vector<bool> state_seen(ns, false), object_seen(no, false);
  for (const auto& p : pairs) {
    if (p.state >= ns || p.object >= no) {
      throw ValidationError("pair (" + std::to_string(p.state) + ", " + std::to_string(p.object) +
                            ") is out of range");
    }
    auto& slot = grid[p.state * no + p.object];
    if (slot != -1) {
      throw ValidationError("duplicate pair (" + states[p.state] + ", " + objects[p.object] + ")");
    }
    slot = 0;
    if (p.seen) {
      state_seen[p.state] = true;
      object_seen[p.object] = true;
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    if (!state_seen[s]) throw ValidationError("state '" + states[s] + "' occurs in no seen pair");
  }
  for (std::size_t o = 0; o < no; ++o) {
    if (!object_seen[o]) throw ValidationError("object '" + objects[o] + "' occurs in no seen pair");
  }

  std::stable_sort(pairs.begin(), pairs.end(), [](const Composition& a, const Composition& b) {
    if (a.seen != b.seen) return a.seen;
    if (a.state != b.state) return a.state < b.state;
    return a.object < b.object;
  });

  CompositionSpace space;
  space.num_seen_ = static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const Composition& c) { return c.seen; }));
  space.feasible_.assign(ns * no, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    grid[pairs[i].state * no + pairs[i].object] = static_cast<std::ptrdiff_t>(i);
    space.feasible_[pairs[i].state * no + pairs[i].object] = 1;
  }

  std::ostringstream canon;
  canon << "states";
  for (const auto& s : states) canon << '\x1f' << s;
  canon << "\x1eobjects";
  for (const auto& o : objects) canon << '\x1f' << o;
  canon << "\x1epairs";
  for (const auto& p : pairs) canon << '\x1f' << p.state << ',' << p.object << ',' << (p.seen ? 'S' : 'U');
  space.hash_ = sha256_hex(canon.str());

  space.states_ = std::move(states);
  space.objects_ = std::move(objects);
  space.pairs_ = std::move(pairs);
  space.grid_index_ = std::move(grid);
  return space;
}

std::optional<std::size_t> CompositionSpace::pair_index(std::size_t state, std::size_t object) const {
  if (state >= num_states() || object >= num_objects()) return std::nullopt;
  const auto idx = grid_index_[state * num_objects() + object];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

}  // namespace prolt
