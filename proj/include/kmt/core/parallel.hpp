#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace kmt {

/// Evaluate fn(i) for i in [0, count) on up to `threads` workers.
///
/// Results land at their index, so the output never depends on scheduling;
/// callers derive each replicate's stream from the index alone.
template <class Fn>
auto run_replicates(std::int64_t count, int threads, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::int64_t>> {
  using Result = std::invoke_result_t<Fn&, std::int64_t>;
  std::vector<Result> results(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, std::max<std::int64_t>(count, 1)));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::int64_t begin = count * t / workers;
        const std::int64_t end = count * (t + 1) / workers;
        for (std::int64_t i = begin; i < end; ++i) results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace kmt
