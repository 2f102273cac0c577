#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace emfim {

/// Name of the environment variable that overrides the worker count.
inline constexpr const char* kThreadsEnv = "EMFIM_THREADS";

/// requested > 0 wins; otherwise EMFIM_THREADS; otherwise hardware concurrency.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/**
 * Evaluates fn(k) for k in [0, count) and stores results by index.
 * If any replicate throws, the exception of the lowest failing index is
 * rethrown, so failures do not depend on scheduling.
 */
template <class T, class Fn>
std::vector<T> map_replicates(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
      if (failed.load(std::memory_order_relaxed)) break;
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  const std::size_t n_workers = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace emfim
