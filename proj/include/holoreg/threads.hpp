#ifndef HOLOREG_THREADS_HPP
#define HOLOREG_THREADS_HPP

#include <cstddef>
#include <functional>

namespace holoreg {

// Worker count for data-parallel loops; initialized to 1, overridable via
// the HOLOREG_THREADS environment variable (see init_threads_from_env).
void set_thread_count(unsigned n);
unsigned thread_count();
void init_threads_from_env();

// Runs fn(i) for i in [0, n). Partitioning is deterministic; results must
// not depend on execution order (disjoint writes only).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace holoreg

#endif
