#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace regimeopt {

// Worker cap: REGIMEOPT_THREADS if set, else hardware concurrency.
inline unsigned worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("REGIMEOPT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && static_cast<unsigned>(v) < hw) return static_cast<unsigned>(v);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return hw;
}

// Chunked map-reduce over [0, n). Work fills a fresh accumulator for an index
// range; per-chunk results are merged in chunk order, so the reduction is
// bitwise identical for a fixed chunk size no matter how many workers run.
template <class Acc, class Work>
Acc chunked_reduce(long n, Work&& work, long chunk_size = 8192) {
    if (n <= 0) return Acc{};
    const long n_chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<Acc> partial(static_cast<std::size_t>(n_chunks));

    const unsigned workers =
        std::min<unsigned>(worker_count(), static_cast<unsigned>(n_chunks));
    if (workers <= 1) {
        for (long c = 0; c < n_chunks; ++c) {
            const long lo = c * chunk_size;
            const long hi = std::min(n, lo + chunk_size);
            work(partial[static_cast<std::size_t>(c)], lo, hi);
        }
    } else {
        std::atomic<long> next{0};
        auto run = [&] {
            for (;;) {
                const long c = next.fetch_add(1);
                if (c >= n_chunks) break;
                const long lo = c * chunk_size;
                const long hi = std::min(n, lo + chunk_size);
                work(partial[static_cast<std::size_t>(c)], lo, hi);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }

    Acc total{};
    for (auto& p : partial) total.merge(p);
    return total;
}

// Running mean / standard-error accumulator (plain sums; merge order is fixed
// by chunked_reduce).
struct MeanAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    long n = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }
    void merge(const MeanAccumulator& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
    double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        double v = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return v > 0.0 ? v : 0.0;
    }
    double std_error() const {
        return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

}  // namespace regimeopt
