#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ssdiag {

/// Worker count from SSDIAG_WORKERS, else hardware concurrency.
inline unsigned default_workers() {
    if (const char* env = std::getenv("SSDIAG_WORKERS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// results into slot i, so output is independent of scheduling. If several
/// indices throw, the exception from the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    const std::size_t nthreads = std::min<std::size_t>(std::max(1u, workers), count);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };

    std::vector<std::jthread> threads;
    threads.reserve(nthreads - 1);
    for (std::size_t t = 1; t < nthreads; ++t) threads.emplace_back(worker);
    worker();
    threads.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace ssdiag
