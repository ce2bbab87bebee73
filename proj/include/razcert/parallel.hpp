#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace razcert {

/// Execution mode of the data-parallel kernels. Serial is the reference
/// implementation; Parallel runs the same chunk structure under OpenMP.
/// Chunk boundaries are fixed, and per-chunk partial results are combined in
/// chunk order, so both modes produce bit-identical results for any thread
/// count.
enum class ExecMode { Serial, Parallel };

/// Caps the OpenMP worker pool (CLI --threads). 0 keeps the runtime default.
void set_thread_cap(int threads);
int thread_cap();

using ChunkFn = std::function<void(std::size_t begin, std::size_t end, std::size_t chunk_index)>;

std::size_t chunk_count(std::size_t n, std::size_t chunk_size);

/// Runs fn over [0, n) split into fixed chunks of chunk_size.
void for_chunks(std::size_t n, std::size_t chunk_size, ExecMode mode, const ChunkFn& fn);

/// Deterministic chunked reduction: per_chunk produces one partial accumulator
/// per chunk (evaluated sequentially inside the chunk), combine folds partials
/// in ascending chunk order.
template <class Acc, class PerChunk, class Combine>
Acc reduce_chunks(std::size_t n, std::size_t chunk_size, ExecMode mode, Acc init,
                  PerChunk&& per_chunk, Combine&& combine) {
    std::size_t nchunks = chunk_count(n, chunk_size);
    std::vector<Acc> partial(nchunks);
    for_chunks(n, chunk_size, mode, [&](std::size_t b, std::size_t e, std::size_t c) {
        partial[c] = per_chunk(b, e);
    });
    Acc acc = std::move(init);
    for (std::size_t c = 0; c < nchunks; ++c) acc = combine(std::move(acc), std::move(partial[c]));
    return acc;
}

}  // namespace razcert
