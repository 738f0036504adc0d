#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "blobflow/util.hpp"

namespace blobflow {

// 0 means "use the hardware"; any positive request is honored as-is.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n) with static contiguous partitioning. Callers
// write to disjoint output slots, so the result never depends on the thread
// count or on scheduling. An exception thrown by fn is rethrown on the
// calling thread (the one from the lowest-indexed chunk that failed).
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const std::size_t t = std::min(static_cast<std::size_t>(resolve_threads(threads)),
                                   std::max<std::size_t>(n, 1));
    if (t <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::vector<std::exception_ptr> errors(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t lo = std::min(n, k * chunk), hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, k, &fn, &errors] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

// Sum of term(i) with a bit-reproducible result that is independent of the
// thread count: terms are computed in parallel into a buffer and reduced in
// index order.
template <class Term>
double deterministic_sum(std::size_t n, int threads, Term&& term) {
    std::vector<double> buf(n);
    parallel_for(n, threads, [&](std::size_t i) { buf[i] = term(i); });
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += buf[i];
    return s;
}

// Sum of term(i) with per-thread partials combined in thread order: fastest,
// reproducible for a fixed thread count, but the grouping (and hence the
// roundoff) changes with the thread count.
template <class Term>
double fast_sum(std::size_t n, int threads, Term&& term) {
    const std::size_t t = std::min(static_cast<std::size_t>(resolve_threads(threads)),
                                   std::max<std::size_t>(n, 1));
    if (t <= 1 || n < 2) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += term(i);
        return s;
    }
    std::vector<double> partial(t, 0.0);
    std::vector<std::thread> pool;
    pool.reserve(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t lo = std::min(n, k * chunk), hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, k, &partial, &term] {
            double s = 0;
            for (std::size_t i = lo; i < hi; ++i) s += term(i);
            partial[k] = s;
        });
    }
    for (auto& th : pool) th.join();
    double s = 0;
    for (double p : partial) s += p;
    return s;
}

}  // namespace blobflow
