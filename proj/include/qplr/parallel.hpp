#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qplr::par {

/// 0 means "use the hardware thread count"; never returns 0.
inline std::size_t resolve_threads(std::size_t requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(worker, index) for every index in [0, count). Indices are handed
/// out dynamically, so fn must write only to per-index or per-worker slots;
/// results are then identical for any thread count. worker is in
/// [0, min(num_threads, count)), so callers can keep one scratch object per
/// worker. The first exception thrown by fn stops the pool and is rethrown.
inline void
parallel_for(std::size_t count, std::size_t num_threads,
             const std::function<void(std::size_t, std::size_t)> &fn) {
    if (count == 0) return;
    num_threads = std::min(resolve_threads(num_threads), count);
    if (num_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(0, i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&](std::size_t worker) {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(worker, i);
            } catch (...) {
                stop.store(true, std::memory_order_relaxed);
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(num_threads);
    for (std::size_t w = 0; w < num_threads; ++w) pool.emplace_back(body, w);
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace qplr::par
