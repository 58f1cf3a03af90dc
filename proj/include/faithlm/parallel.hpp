#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace faithlm::parallel {

enum class Policy { Serial, Parallel };

/// Reference loop. Runs fn(0..n-1) in index order; the first exception
/// propagates immediately.
template <typename Fn>
void for_each_index_serial(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// OpenMP loop with at most `max_threads` workers. Exceptions are captured per
/// index and the one with the lowest index is rethrown after the loop, so the
/// surfaced error matches what the serial loop would raise first.
template <typename Fn>
void for_each_index_parallel(std::size_t n, int max_threads, Fn&& fn) {
  if (max_threads < 1) max_threads = 1;
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(max_threads)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Fn>
void for_each_index(Policy policy, std::size_t n, int max_threads, Fn&& fn) {
  if (policy == Policy::Parallel && max_threads > 1 && n > 1) {
    for_each_index_parallel(n, max_threads, fn);
  } else {
    for_each_index_serial(n, fn);
  }
}

inline int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace faithlm::parallel
