#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rayleigh {

// Runs fn(0..count-1) on up to `threads` workers pulling indices from a
// shared counter. The first exception stops the loop and is rethrown.
template<class Fn>
inline void parallelFor(std::int64_t count, unsigned threads, Fn &&fn) {
    const unsigned        workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::int64_t>(count, 1024))));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr    failure;
    std::mutex            failureMutex;
    auto                  run = [&] {
        for(;;) {
            const std::int64_t i = next.fetch_add(1);
            if(i >= count) return;
            try {
                fn(i);
            } catch(...) {
                std::lock_guard lock(failureMutex);
                if(!failure) failure = std::current_exception();
                next = count;
                return;
            }
        }
    };
    if(workers == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for(unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
        for(auto &t : pool) t.join();
    }
    if(failure) std::rethrow_exception(failure);
}

} // namespace rayleigh
