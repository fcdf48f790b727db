#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sdlab {

/// Worker count used by render passes and batch evaluation. Defaults to 1.
int num_threads();
void set_num_threads(int n);

/// Calls fn(block) for block in [0, n_blocks). Each block must write only its own output
/// slot; callers reduce slots in block order, so results do not depend on the worker count.
template <typename Fn>
void parallel_blocks(int n_blocks, Fn&& fn) {
  const int workers = std::min(num_threads(), n_blocks);
  if (workers <= 1) {
    for (int b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
        try {
          fn(b);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sdlab
