#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "vcplm/types.hpp"

namespace vcplm {

/// Runs f(0) ... f(count - 1) on up to `threads` workers.  Each task must
/// write only to its own output slot, so results do not depend on the
/// schedule.  The first exception thrown by a task is rethrown here.
template <class F>
void parallel_for(Index count, int threads, F&& f) {
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(count, 1));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index t = 0; t < workers; ++t) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vcplm
