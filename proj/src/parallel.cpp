#include "trihedge/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace trihedge {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int threads) { g_threads.store(threads < 0 ? 0 : threads); }

int thread_count() {
    int t = g_threads.load();
    if (t <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        t = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return t;
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn) {
    if (end <= begin) return;
    const std::size_t total = end - begin;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_count()), total);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    // Contiguous chunks; chunk boundaries depend only on (total, workers).
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (total + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, err = &errors[w]] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                *err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    // Rethrow the error from the lowest chunk so the reported failure does
    // not depend on thread scheduling.
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace trihedge
