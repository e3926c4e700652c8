#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "muchapro/types.hpp"

namespace muchapro {

inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static block partition of [0, n). The body must write only to its own
/// slots; results are then independent of the worker count.
inline void parallel_for(Index n, int jobs,
                         const std::function<void(Index, Index)>& body) {
  jobs = std::min<Index>(resolve_jobs(jobs), std::max<Index>(n, 1));
  if (jobs <= 1 || n < 2) {
    body(0, n);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
  const Index chunk = (n + jobs - 1) / jobs;
  for (int t = 0; t < jobs; ++t) {
    const Index begin = std::min<Index>(t * chunk, n);
    const Index end = std::min<Index>(begin + chunk, n);
    workers.emplace_back([&, t, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace muchapro
