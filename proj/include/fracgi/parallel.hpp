#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fracgi/error.hpp"

namespace fracgi {

// Runs task(k) for k in [0, count) on up to `workers` threads. Tasks must
// write only to slot k of their output, which makes the result independent of
// the schedule. The first exception thrown by any task is rethrown.
template <class Task>
void parallel_for(std::size_t count, std::size_t workers, Task&& task) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t k = next.fetch_add(1);
          if (k >= count) return;
          try {
            task(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(count);
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Worker count from FRACGI_WORKERS, else the hardware concurrency.
inline std::size_t default_worker_count() {
  if (const char* env = std::getenv("FRACGI_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw UsageError(std::string("FRACGI_WORKERS must be a positive integer, got '") + env + "'");
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace fracgi
