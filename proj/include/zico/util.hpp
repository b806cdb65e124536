#pragma once

#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace zico {

// Fixed 17-significant-digit formatting so every double round-trips through
// text and reruns produce byte-identical files.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Run fn(i) for i in [0, n) on up to `jobs` threads. Work is split by index,
// results must be written to caller-owned slots, so the outcome is identical
// for any job count. The first exception thrown by any index is rethrown
// here after all workers finish.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min(jobs, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex mu;
    std::exception_ptr first;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

inline uint64_t fnv1a64(std::string_view text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : text) {
        h ^= uint8_t(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace zico
