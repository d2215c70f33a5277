#include "holoreg/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace holoreg {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned n) { g_threads = n == 0 ? 1 : n; }

unsigned thread_count() { return g_threads.load(); }

void init_threads_from_env() {
  if (const char* env = std::getenv("HOLOREG_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) set_thread_count(static_cast<unsigned>(n));
  }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned nt = std::min<std::size_t>(thread_count(), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) {
    workers.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace holoreg
