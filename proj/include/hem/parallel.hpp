#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

namespace hem {

/// Caps worker parallelism. threads == 0 means "all available cores".
/// Results never depend on this value: work items draw from their own RNG
/// streams and reductions use a fixed chunking.
struct Execution {
    std::size_t threads = 1;
};

template <class F>
void parallel_for(const Execution& exec, std::size_t n, F&& body) {
    if (n == 0) return;
    if (exec.threads == 1 || n == 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    const int workers = exec.threads == 0 ? oneapi::tbb::task_arena::automatic
                                          : static_cast<int>(exec.threads);
    oneapi::tbb::task_arena arena(workers);
    arena.execute([&] {
        oneapi::tbb::parallel_for(oneapi::tbb::blocked_range<std::size_t>(0, n),
                                  [&](const oneapi::tbb::blocked_range<std::size_t>& r) {
                                      for (std::size_t k = r.begin(); k != r.end(); ++k) body(k);
                                  });
    });
}

/// Sum of term(k) for k in [0, n). Partial sums are formed over fixed chunks
/// and combined left to right, so the floating-point result is identical for
/// every thread count.
template <class F>
double deterministic_sum(const Execution& exec, std::size_t n, F&& term, std::size_t chunk = 64) {
    if (n == 0) return 0.0;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(chunks, 0.0);
    parallel_for(exec, chunks, [&](std::size_t c) {
        const std::size_t lo = c * chunk;
        const std::size_t hi = lo + chunk < n ? lo + chunk : n;
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += term(k);
        partial[c] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace hem
