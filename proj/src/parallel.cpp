#include "sdlab/parallel.hpp"

namespace sdlab {

namespace {
std::atomic<int> g_threads{1};
}

int num_threads() { return g_threads.load(); }

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }

}  // namespace sdlab
