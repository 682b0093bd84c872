#include "sparsescene/parallel.hpp"

namespace sparsescene {

namespace {
std::atomic<unsigned> configured{0};
}

void set_thread_count(unsigned n) { configured = n; }

unsigned thread_count() {
  const unsigned n = configured;
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace sparsescene
