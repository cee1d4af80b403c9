// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>

namespace denim {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: value i of stream s under seed k is
///   splitmix64_mix(k + (s * 2^32 + i + 1) * 0x9E3779B97F4A7C15).
/// Any (seed, stream, index) triple can be evaluated independently, which keeps
/// parameter initialization reproducible in any language.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t at(std::uint64_t index) const {
        const std::uint64_t counter = (stream_ << 32) + index + 1;
        return splitmix64_mix(seed_ + counter * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t next() { return at(index_++); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    std::uint64_t position() const { return index_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
};

}  // namespace denim
