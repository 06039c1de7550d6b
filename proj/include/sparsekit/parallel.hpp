#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "sparsekit/types.hpp"

namespace sparsekit {

/// Default worker count: SPARSEKIT_THREADS env var, else hardware concurrency.
inline unsigned default_thread_count() {
    if (const char* env = std::getenv("SPARSEKIT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; outputs
/// written to disjoint slots are identical whatever the thread count.
template <typename Fn>
void parallel_for(index_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (index_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<index_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (index_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sparsekit
