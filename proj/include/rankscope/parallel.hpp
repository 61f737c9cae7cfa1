// Deterministic fork-join helper: work is split by index into contiguous
// blocks, so results never depend on the worker count. Thread budget comes
// from set_threads() when called, else the RANKSCOPE_THREADS environment
// variable, else the hardware concurrency.
#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "rankscope/common.hpp"

namespace rankscope {

namespace detail {
inline std::atomic<int>& thread_override() {
  static std::atomic<int> value{0};
  return value;
}
}  // namespace detail

inline void set_threads(int n) {
  if (n < 0) throw input_error("threads: count must be >= 0 (0 restores the default)");
  detail::thread_override().store(n);
}

inline int resolve_threads() {
  const int forced = detail::thread_override().load();
  if (forced > 0) return forced;
  if (const char* env = std::getenv("RANKSCOPE_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
      throw input_error("RANKSCOPE_THREADS: not a positive integer");
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, count). fn must only write to per-index state.
template <class Fn>
void parallel_for(int count, Fn&& fn) {
  if (count <= 0) return;
  const int threads = std::min(resolve_threads(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  const int base = count / threads, extra = count % threads;
  int begin = 0;
  for (int t = 0; t < threads; ++t) {
    const int len = base + (t < extra ? 1 : 0);
    const int end = begin + len;
    pool.emplace_back([&fn, &errors, t, begin, end] {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
    begin = end;
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rankscope
