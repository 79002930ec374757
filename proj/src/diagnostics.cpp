#include "prolt/diagnostics.hpp"

#include <iostream>
#include <map>
#include <mutex>
#include <string>

namespace prolt::diag {
namespace {

constexpr std::size_t kPrintLimit = 3;

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::size_t, std::less<>> counts;
  bool quiet = false;
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void emit(std::string_view code, std::string_view message) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.counts.find(code);
  if (it == r.counts.end()) it = r.counts.emplace(std::string(code), 0).first;
  ++it->second;
  if (!r.quiet && it->second <= kPrintLimit) {
    std::cerr << "[prolt:" << code << "] " << message;
    if (it->second == kPrintLimit) std::cerr << " (further occurrences suppressed)";
    std::cerr << '\n';
  }
}

std::size_t count(std::string_view code) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.counts.find(code);
  return it == r.counts.end() ? 0 : it->second;
}

void reset() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.counts.clear();
}

void set_quiet(bool quiet) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.quiet = quiet;
}

}  // namespace prolt::diag
