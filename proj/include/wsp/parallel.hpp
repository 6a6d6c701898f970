#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wsp {

/// Bounds worker parallelism for every parallel stage. n <= 0 keeps the
/// OpenMP default.
void set_threads(int n);
int max_threads();

/// Runs body(i) for i in [0, n). Iterations must write to disjoint outputs;
/// results are then independent of the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    body(static_cast<std::size_t>(i));
  }
}

/// parallel_for that lets the body throw: the exception of the lowest
/// failing index is rethrown once every iteration has finished.
template <typename Body>
void parallel_for_checked(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace wsp
