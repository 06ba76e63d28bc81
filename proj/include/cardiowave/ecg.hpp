#pragma once

#include <cstdint>
#include <vector>

#include "cardiowave/common.hpp"

namespace cardiowave {

/// Sample indices of the five fiducial points of one beat; kNoIndex when absent.
struct BeatAnnotation {
    std::uint32_t p = kNoIndex;
    std::uint32_t q = kNoIndex;
    std::uint32_t r = kNoIndex;
    std::uint32_t s = kNoIndex;
    std::uint32_t t = kNoIndex;

    friend bool operator==(const BeatAnnotation&, const BeatAnnotation&) = default;
};

/// ECG samples in millivolts with optional per-beat annotations.
struct EcgTrace {
    std::uint32_t sample_rate = 200;
    Series samples;
    std::vector<BeatAnnotation> beats;

    [[nodiscard]] double duration() const
    {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }

    [[nodiscard]] std::vector<std::uint32_t> r_indices() const
    {
        std::vector<std::uint32_t> out;
        out.reserve(beats.size());
        for (const auto& b : beats)
            if (b.r != kNoIndex) out.push_back(b.r);
        return out;
    }
};

} // namespace cardiowave
