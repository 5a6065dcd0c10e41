#pragma once
/// \file parallel.hpp
/// Deterministic replicate-parallel map over a TBB arena.

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde {

/// Raised when replicate `index` throws; replay it alone with the same index,
/// or with `substream` when the caller attached one.
class ReplicateFailure : public std::runtime_error {
public:
    static constexpr std::uint64_t no_substream = ~std::uint64_t(0);

    ReplicateFailure(std::size_t index, const std::string& what, std::uint64_t substream = no_substream)
        : std::runtime_error(message(index, what, substream)), index_(index), substream_(substream), cause_(what) {}
    std::size_t index() const { return index_; }
    bool has_substream() const { return substream_ != no_substream; }
    std::uint64_t substream() const { return substream_; }
    const std::string& cause() const { return cause_; }

private:
    static std::string message(std::size_t index, const std::string& what, std::uint64_t substream) {
        std::string m = "replicate " + std::to_string(index);
        if (substream != no_substream) m += " (substream " + std::to_string(substream) + ")";
        return m + " failed: " + what;
    }
    std::size_t index_;
    std::uint64_t substream_;
    std::string cause_;
};

/// out[i] = fn(i) for i < count, on `threads` workers (0 = all cores).
/// Results are stored by index, so they do not depend on scheduling.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, int threads, Fn&& fn) {
    std::vector<T> out(count);
    std::mutex mu;
    std::size_t failed = count;
    std::string what;
    auto body = [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            try {
                out[i] = fn(i);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                if (i < failed) failed = i, what = e.what();
            }
        }
    };
    if (threads == 1) {
        body(tbb::blocked_range<std::size_t>(0, count));
    } else {
        tbb::task_arena arena(threads > 0 ? threads : tbb::task_arena::automatic);
        arena.execute([&] { tbb::parallel_for(tbb::blocked_range<std::size_t>(0, count, 1), body); });
    }
    if (failed < count) throw ReplicateFailure(failed, what);
    return out;
}

/// parallel_map whose failures name the RNG substream of the failing replicate.
template <class T, class Fn, class Sub>
std::vector<T> replicate_map(std::size_t count, int threads, Sub&& substream_of, Fn&& fn) {
    try {
        return parallel_map<T>(count, threads, std::forward<Fn>(fn));
    } catch (const ReplicateFailure& e) {
        throw ReplicateFailure(e.index(), e.cause(), substream_of(e.index()));
    }
}

}  // namespace ckde
