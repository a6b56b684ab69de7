#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fracpeak {

// task(i) for i < n on up to `workers` threads; tasks must write disjoint
// slots. The first exception is rethrown after every worker has joined.
template <class F>
void parallel_for(std::size_t n, int workers, F&& task) {
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
    if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < k; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (err) std::rethrow_exception(err);
}

} // namespace fracpeak
