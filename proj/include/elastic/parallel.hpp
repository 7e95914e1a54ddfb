#pragma once

#include <cstddef>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace elastic {

// Work is cut into fixed-size chunks whose boundaries do not depend on the
// thread count; per-chunk partial results are combined in chunk order.
inline constexpr std::size_t kChunk = 8192;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunk) { return (n + chunk - 1) / chunk; }

// f(chunk_index, begin, end) for every chunk, possibly concurrently.
template <class F>
void for_chunks(std::size_t n, F&& f, std::size_t chunk = kChunk) {
    const std::size_t nc = chunk_count(n, chunk);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, nc, 1), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t c = r.begin(); c != r.end(); ++c) f(c, c * chunk, std::min(n, (c + 1) * chunk));
    });
}

// Runs f(i) for i in [0, n) in parallel, one task per index.
template <class F>
void for_each_index(std::size_t n, F&& f) {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) f(i);
    });
}

// Caps worker threads for the lifetime of the returned object.
class ThreadLimit {
public:
    explicit ThreadLimit(int threads);
    ~ThreadLimit();
    ThreadLimit(const ThreadLimit&) = delete;
    ThreadLimit& operator=(const ThreadLimit&) = delete;

private:
    void* impl_;
};

}  // namespace elastic
