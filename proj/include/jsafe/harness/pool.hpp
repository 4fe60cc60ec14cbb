#ifndef JSAFE_HARNESS_POOL_HPP
#define JSAFE_HARNESS_POOL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace jsafe {

/// Runs task(i) for i in [0, count) on up to `workers` threads and returns
/// the results in index order. The first exception (lowest index) is
/// rethrown after all workers finish.
template <class R>
std::vector<R> parallel_map(std::size_t count, unsigned workers, const std::function<R(std::size_t)>& task) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i] = task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace jsafe

#endif  // JSAFE_HARNESS_POOL_HPP
