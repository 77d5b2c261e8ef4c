#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hkprop {

/// Calls fn(i) for every i in [0, n) using up to `threads` workers over
/// contiguous blocks. Each index must only write state owned by that index,
/// which keeps results independent of the thread count. The exception from
/// the lowest failing block is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn) {
    if (n == 0) return;
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = w * block, hi = std::min(n, lo + block);
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

} // namespace hkprop
