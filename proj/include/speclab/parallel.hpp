#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace speclab {

/// Run fn(i) for i in [0, total) on up to `threads` workers. Work items are
/// claimed from a shared counter; callers must write results into
/// per-index slots so the outcome is independent of the schedule.
inline void parallel_for(std::int64_t total, int threads, const std::function<void(std::int64_t)>& fn) {
    if (total <= 0) return;
    if (threads <= 1 || total == 1) {
        for (std::int64_t i = 0; i < total; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, total));
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::int64_t i = next.fetch_add(1);
                    if (i >= total) return;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Order-fixed sum with Neumaier compensation; used for all Monte Carlo
/// aggregation so results do not depend on the worker count.
inline double compensated_sum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;      // standard error of the mean
    double stddev = 0.0;  // sample standard deviation (ddof = 1)
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
    MeanSe r;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return r;
    r.mean = compensated_sum(xs) / n;
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
    r.se = r.stddev / std::sqrt(n);
    return r;
}

}  // namespace speclab
