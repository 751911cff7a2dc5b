#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stocres {

/// Number of worker threads used by the Monte Carlo routines; 0 means hardware concurrency.
///
/// Outputs never depend on this value: work items write to their own slots and all
/// reductions happen afterwards in index order.
struct Parallelism {
    unsigned threads = 0;

    unsigned resolved() const {
        if (threads != 0) return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Calls body(i) for every i in [0, count), spread over contiguous chunks.
template <typename Body>
void parallel_for(std::size_t count, Parallelism par, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(par.resolved(), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    constexpr std::size_t kChunk = 256;
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t begin = next.fetch_add(kChunk);
                if (begin >= count) break;
                const std::size_t end = std::min(count, begin + kChunk);
                for (std::size_t i = begin; i < end; ++i) body(i);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(count);
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

} // namespace stocres
