#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace densemodel::util {

/// Compensated (Kahan) summation; keeps layer-cake and prefix-sum identities
/// below 1e-12 even on long vectors.
class KahanSum {
  public:
    void add(double x) {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double kahan_total(const std::vector<double>& xs) {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

/// Global worker cap shared by the few parallel loops in the library.
/// 0 means "use hardware concurrency". Set from --threads / DENSEMODEL_THREADS.
inline std::size_t& thread_cap() {
    static std::size_t cap = 0;
    return cap;
}

inline std::size_t effective_threads(std::size_t jobs) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t cap = thread_cap() == 0 ? hw : std::min(thread_cap(), hw);
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Deterministic chunked parallel for: body(begin, end, chunk_index).
/// Chunk boundaries depend only on (n, worker count), so any reduction that
/// combines per-chunk results in chunk order is bit-reproducible.
inline void parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = effective_threads(n);
    if (workers == 1) {
        body(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t per = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * per;
        std::size_t hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, w] { body(lo, hi, w); });
    }
    for (auto& th : pool) th.join();
}

/// Work-queue parallel for over independent items, for batches where item
/// costs vary wildly. Each item's own computation stays deterministic; only
/// the execution order varies.
inline void parallel_items(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = effective_threads(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace densemodel::util
