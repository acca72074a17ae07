#pragma once

#include <cstddef>
#include <functional>

namespace combsim {

// Process-wide worker count used when a call site passes threads == 0.
void set_default_threads(std::size_t threads);
std::size_t default_threads();

// Runs body(0..count-1) on up to `threads` workers. Each index runs exactly
// once; the first exception (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace combsim
