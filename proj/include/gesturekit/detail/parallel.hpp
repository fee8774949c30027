#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gesturekit {

/// Number of workers used when the caller passes 0.
[[nodiscard]] inline std::size_t default_worker_count() noexcept {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {

/**
 * @brief Run @p body(i) for every i in [0, n) on up to @p workers threads.
 * @details Tasks are claimed dynamically from a shared counter. The first exception thrown by
 *          any task is rethrown on the calling thread after all workers joined.
 */
template <typename Body>
void parallel_for(std::size_t n, std::size_t workers, Body &&body) {
    if (workers == 0) {
        workers = default_worker_count();
    }
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{ 0 };
    std::atomic<bool> failed{ false };
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                const std::lock_guard lock{ error_mutex };
                if (!first_error) {
                    first_error = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) {
        threads.emplace_back(worker);
    }
    worker();
    for (auto &t : threads) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace detail
}  // namespace gesturekit
