#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace qrdesign {

/**
 * Number of worker threads to use for embarrassingly parallel loops.
 *
 * Resolves, in order: the QRDESIGN_THREADS environment variable (values < 1
 * are treated as 1), then std::thread::hardware_concurrency(), then 1.
 */
inline unsigned thread_budget() {
    if (const char* env = std::getenv("QRDESIGN_THREADS")) {
        try {
            const long v = std::stol(env);
            return v < 1 ? 1u : static_cast<unsigned>(v);
        } catch (...) {
            // fall through to the hardware default
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/**
 * Run body(i) for i in [0, n) across the thread budget.
 *
 * Work is split into contiguous blocks, one per thread, so results written
 * to caller-owned slot i depend only on i.  Reductions over such slots are
 * performed by the caller in index order and are therefore independent of
 * the thread count.  body must not throw; wrap throwing work and convert to
 * a per-slot status if needed.
 */
template <class F>
void parallel_for(std::size_t n, F&& body) {
    const unsigned budget = std::min<std::size_t>(thread_budget(), n);
    if (budget <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(budget);
    const std::size_t chunk = (n + budget - 1) / budget;
    for (unsigned t = 0; t < budget; ++t) {
        const std::size_t lo = static_cast<std::size_t>(t) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace qrdesign
