#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace apmlmc {

// Worker cap: APMLMC_THREADS if set, else hardware concurrency.
int worker_count();

// Runs f(chunk_index, begin, end) over [first, first+count) split into
// fixed-size chunks. Chunk boundaries depend only on (first, count, chunk),
// never on the worker count, so per-chunk results can be merged in chunk
// order for bit-identical output under any thread count.
template <typename F>
void parallel_chunks(std::int64_t first, std::int64_t count, std::int64_t chunk,
                     int workers, F&& f) {
    if (count <= 0) return;
    const std::int64_t n_chunks = (count + chunk - 1) / chunk;
    auto run_chunk = [&](std::int64_t c) {
        const std::int64_t begin = first + c * chunk;
        const std::int64_t end = std::min(first + count, begin + chunk);
        f(c, begin, end);
    };
    if (workers <= 1 || n_chunks == 1) {
        for (std::int64_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                run_chunk(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = int(std::min<std::int64_t>(workers, n_chunks));
    pool.reserve(std::size_t(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace apmlmc
