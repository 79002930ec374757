#pragma once

#include <cstddef>
#include <string_view>

// Non-fatal numerical warnings (zero-norm embeddings, floored priors, ...).
// Each code is counted; the first few occurrences of a code go to stderr.
namespace prolt::diag {

void emit(std::string_view code, std::string_view message);
std::size_t count(std::string_view code);
void reset();
void set_quiet(bool quiet);

}  // namespace prolt::diag
