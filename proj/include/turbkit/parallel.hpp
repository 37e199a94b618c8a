#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace turbkit {

// Number of workers to use when the caller passes 0.
inline unsigned default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [begin, end) on up to `workers` threads. Work items are
// claimed dynamically; each index runs exactly once. The first exception thrown
// by any item is rethrown on the calling thread after all workers finish.
template <class Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn, unsigned workers = 0) {
    if (end <= begin) {
        return;
    }
    if (workers == 0) {
        workers = default_workers();
    }
    const auto count = static_cast<std::size_t>(end - begin);
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::ptrdiff_t i = begin; i < end; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::ptrdiff_t> next{begin};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::ptrdiff_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= end) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next.store(end);
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) {
        pool.emplace_back(body);
    }
    body();
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace turbkit
