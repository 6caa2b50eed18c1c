#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kloosterlab {

// Worker count from $KLOOSTERLAB_WORKERS (default: hardware concurrency).
inline unsigned worker_count() {
    if (const char* env = std::getenv("KLOOSTERLAB_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return static_cast<unsigned>(n);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// out[i] = fn(i) for i < n on a bounded pool pulling indices from a shared
// counter. Results land by index, so any reduction over `out` done in index
// order does not depend on the worker count. The first exception thrown is
// rethrown after the pool drains.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn fn, unsigned workers = worker_count()) {
    std::vector<T> out(n);
    workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(n, 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

// Pairwise sum in index order; the result is a fixed function of the input
// sequence.
template <class T>
T pairwise_sum(const T* v, std::size_t n) {
    if (n == 0) return T{};
    if (n <= 16) {
        T acc = v[0];
        for (std::size_t i = 1; i < n; ++i) acc += v[i];
        return acc;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(v.data(), v.size());
}

} // namespace kloosterlab
