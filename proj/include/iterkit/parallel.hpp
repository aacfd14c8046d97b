#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace iterkit {

// Deterministic path-parallel reduction.  Paths are grouped into fixed-size
// blocks (independent of the worker count); workers claim whole blocks and
// fill per-block accumulators, which are then merged in block order.  The
// result is therefore byte-identical for any number of threads.
//
// MakeAcc: () -> Acc
// PerPath: (Acc&, uint64_t path_index) -> void
// Merge:   (Acc&, Acc&&) -> void          (applied in increasing block order)
template <class MakeAcc, class PerPath, class Merge>
auto parallel_paths(std::uint64_t n_paths, unsigned n_threads,
                    MakeAcc make_acc, PerPath per_path, Merge merge,
                    std::uint64_t block_size = 8192) {
    using Acc = decltype(make_acc());
    if (n_threads == 0) n_threads = 1;
    const std::uint64_t n_blocks =
        n_paths == 0 ? 0 : (n_paths + block_size - 1) / block_size;
    std::vector<Acc> partial;
    partial.reserve(n_blocks);
    for (std::uint64_t b = 0; b < n_blocks; ++b) partial.push_back(make_acc());

    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::uint64_t lo = b * block_size;
            const std::uint64_t hi = std::min(n_paths, lo + block_size);
            for (std::uint64_t i = lo; i < hi; ++i) per_path(partial[b], i);
        }
    };
    if (n_threads == 1 || n_blocks <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const unsigned use = std::min<std::uint64_t>(n_threads, n_blocks);
        pool.reserve(use);
        for (unsigned t = 0; t < use; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Acc total = make_acc();
    for (auto& p : partial) merge(total, std::move(p));
    return total;
}

}  // namespace iterkit
