#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace stochastok {

/// Runs body(begin, end) over `workers` contiguous chunks of [0, n). Chunk
/// boundaries depend only on (n, workers), and callers write results into
/// index-addressed slots, so output never depends on scheduling. The first
/// exception thrown by any chunk is rethrown on the calling thread.
inline void parallel_for_chunks(std::size_t n, std::size_t workers,
                                const std::function<void(std::size_t, std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  const std::size_t step = n / workers, extra = n % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t end = begin + step + (w < extra ? 1 : 0);
    threads.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
    begin = end;
  }
  threads.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace stochastok
