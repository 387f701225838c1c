#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace fairvar {

template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, const std::function<T(std::size_t)>& fn)
{
    std::vector<std::optional<T>> slots(n);
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            slots[i].emplace(fn(i));
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        slots[i].emplace(fn(i));
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }
    std::vector<T> out;
    out.reserve(n);
    for (auto& slot : slots) {
        out.push_back(std::move(*slot));
    }
    return out;
}

}  // namespace fairvar
