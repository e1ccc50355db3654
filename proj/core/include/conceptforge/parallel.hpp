#pragma once

#include <cstddef>
#include <functional>

namespace conceptforge {

/// Number of worker threads to use when the caller passes 0.
unsigned default_thread_count();

/// Runs task(0) ... task(n_tasks - 1) on up to `threads` workers. Tasks must
/// write only to their own output slots; the result is then independent of
/// the thread count.
void parallel_for(std::size_t n_tasks, unsigned threads,
                  const std::function<void(std::size_t)>& task);

/// Fixed-size chunking of [0, n): chunk boundaries depend only on n and
/// `chunk`, never on the thread count.
inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return (n + chunk - 1) / chunk;
}

}  // namespace conceptforge
