#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace geopinn {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static contiguous partition of [0, n) over `workers` threads. The caller
// keeps per-worker state and merges it in ascending worker order afterwards,
// which makes results deterministic for a fixed worker count. Exceptions are
// rethrown on the calling thread, lowest worker index first.
template <class Fn>
void run_workers(int workers, std::size_t n, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        if (n > 0) fn(0, std::size_t(0), n);
        return;
    }
    const std::size_t chunk = (n + std::size_t(workers) - 1) / std::size_t(workers);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = std::size_t(w) * chunk;
        if (begin >= n) break;
        const std::size_t end = std::min(n, begin + chunk);
        threads.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[std::size_t(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace geopinn
