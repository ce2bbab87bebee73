#include "razcert/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace razcert {

namespace {
int g_thread_cap = 0;
}

void set_thread_cap(int threads) {
    g_thread_cap = threads;
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
}

int thread_cap() { return g_thread_cap; }

std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
    if (chunk_size == 0) chunk_size = 1;
    return (n + chunk_size - 1) / chunk_size;
}

void for_chunks(std::size_t n, std::size_t chunk_size, ExecMode mode, const ChunkFn& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t nchunks = chunk_count(n, chunk_size);

    if (mode == ExecMode::Serial) {
        for (std::size_t c = 0; c < nchunks; ++c) {
            std::size_t b = c * chunk_size;
            std::size_t e = std::min(n, b + chunk_size);
            fn(b, e, c);
        }
        return;
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
    for (long long c = 0; c < (long long)nchunks; ++c) {
        std::size_t b = std::size_t(c) * chunk_size;
        std::size_t e = std::min(n, b + chunk_size);
        fn(b, e, std::size_t(c));
    }
#else
    for (std::size_t c = 0; c < nchunks; ++c) {
        std::size_t b = c * chunk_size;
        std::size_t e = std::min(n, b + chunk_size);
        fn(b, e, c);
    }
#endif
}

}  // namespace razcert
