#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace nlmech {

// Process-wide worker count for the compute kernels. Results are required to
// be bitwise identical for any value, so this only affects speed.
inline std::atomic<int>& thread_count_ref() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_thread_count(int n) { thread_count_ref().store(n > 0 ? n : 1); }
inline int thread_count() { return thread_count_ref().load(); }

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
/// handled by exactly one worker and workers write to disjoint slots, so the
/// outcome does not depend on the chunking.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const int nt = thread_count();
  constexpr std::size_t kSerialCutoff = 2048;
  if (nt <= 1 || n < kSerialCutoff) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const std::size_t b = std::min(n, static_cast<std::size_t>(t) * chunk);
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace nlmech
