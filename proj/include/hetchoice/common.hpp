#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hetchoice {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent CSV input (schema mismatch, bad cell, empty file).
class CsvError : public Error {
  public:
    using Error::Error;
};

/// Malformed model specification text or violated family invariant.
class SpecError : public Error {
  public:
    using Error::Error;
};

/// Spec references a variable the dataset does not provide, or of the wrong kind.
class BindError : public Error {
  public:
    using Error::Error;
};

/// Domain violation in a numeric kernel (invalid probability, threshold, ...).
class NumericError : public Error {
  public:
    using Error::Error;
};

// SplitMix64 finalizer; used both as a hash and as the step function of the
// counter-based generator below.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based deterministic random stream. The state is a pure function of
/// (seed, stream identifiers), so independent streams can be created for any
/// (individual, channel) pair without sharing mutable state.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
        state_ = splitmix64(seed);
        state_ = splitmix64(state_ ^ (a + 0x9e3779b97f4a7c15ULL));
        state_ = splitmix64(state_ ^ (b + 0xbf58476d1ce4e5b9ULL));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform deviate strictly inside (0,1).
    double next_u01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

/// Runs fn(i) for i in [0, n) on up to `threads` threads with a static block
/// partition. Each index is touched exactly once, so as long as fn(i) writes
/// only to slot i of a preallocated buffer, the result is identical to the
/// sequential loop regardless of thread count.
inline void parallel_for_deterministic(std::size_t n, int threads,
                                       const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nworkers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    std::size_t chunk = (n + nworkers - 1) / nworkers;
    for (std::size_t w = 0; w < nworkers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace hetchoice
