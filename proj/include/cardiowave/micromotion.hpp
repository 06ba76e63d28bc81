#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cardiowave/beamform.hpp"
#include "cardiowave/common.hpp"

namespace cardiowave {

/// Phase and amplified micro-motion of one voxel.
struct MotionSignal {
    Vec3 location;
    Series phase;        // rad, unwrapped
    Series acceleration; // rad / s^2
    double power = 0.0;
    double frame_rate = 200.0;
};

struct PhaseExtraction {
    Series phase;
    std::size_t unreliable = 0; // frames with zero magnitude, filled by interpolation
};

/// Unwrapped arg(S). Zero-magnitude frames are interpolated linearly from
/// their reliable neighbours. Returns std::nullopt when more than 10% of the
/// frames are unreliable.
inline std::optional<PhaseExtraction> extract_phase(std::span<const cdouble> s)
{
    require(!s.empty(), "extract_phase: empty series");
    double peak = 0.0;
    for (const auto& z : s) peak = std::max(peak, std::abs(z));

    const std::size_t n = s.size();
    std::vector<bool> ok(n);
    PhaseExtraction out;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::abs(s[i]);
        ok[i] = std::isfinite(m) && m > 1e-12 * peak && peak > 0;
        if (!ok[i]) ++out.unreliable;
    }
    if (out.unreliable * 10 > n || out.unreliable == n) return std::nullopt;

    out.phase.assign(n, 0.0);
    double prev_raw = 0.0;
    double offset = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        const double raw = std::arg(s[i]);
        if (first) {
            // std::arg is in (-pi, pi]; fold +pi to -pi so the first sample is in [-pi, pi)
            prev_raw = raw >= kPi ? raw - kTwoPi : raw;
            out.phase[i] = prev_raw;
            offset = prev_raw - raw;
            first = false;
            continue;
        }
        const double d = raw - prev_raw;
        if (d > kPi) offset -= kTwoPi;
        else if (d < -kPi) offset += kTwoPi;
        out.phase[i] = raw + offset;
        prev_raw = raw;
    }

    // fill unreliable runs by linear interpolation (edge runs take the nearest value)
    std::size_t i = 0;
    while (i < n) {
        if (ok[i]) { ++i; continue; }
        std::size_t j = i;
        while (j < n && !ok[j]) ++j;
        const bool has_left = i > 0;
        const bool has_right = j < n;
        for (std::size_t k = i; k < j; ++k) {
            if (has_left && has_right) {
                const double f = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
                out.phase[k] = out.phase[i - 1] + f * (out.phase[j] - out.phase[i - 1]);
            } else {
                out.phase[k] = has_left ? out.phase[i - 1] : out.phase[j];
            }
        }
        i = j;
    }
    return out;
}

/// Coefficients c[-3..3] of the least-squares smoothed second-derivative
/// filter, before division by 16 h^2.
inline constexpr std::array<double, 7> kSecondDerivativeTaps = {1.0, 2.0, -1.0, -4.0, -1.0, 2.0, 1.0};

/// Noise-robust second derivative:
///   s''_0 = ((s_-3 + s_3) + 2 (s_-2 + s_2) - (s_-1 + s_1) - 4 s_0) / (16 h^2)
/// The three samples at each edge replicate the nearest interior value.
inline Series amplify_micromotion(std::span<const double> s, double h)
{
    require(s.size() >= 7, "amplify_micromotion: series shorter than 7 samples");
    require(h > 0 && std::isfinite(h), "amplify_micromotion: h must be positive");
    const std::size_t n = s.size();
    const double scale = 1.0 / (16.0 * h * h);
    Series out(n);
    for (std::size_t i = 3; i + 3 < n; ++i) {
        out[i] = ((s[i - 3] + s[i + 3]) + 2.0 * (s[i - 2] + s[i + 2]) - (s[i - 1] + s[i + 1]) - 4.0 * s[i]) * scale;
    }
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = out[3];
        out[n - 1 - i] = out[n - 4];
    }
    return out;
}

/// Phase + acceleration for every voxel that passes the reliability check.
/// Rejected voxels are skipped. h is the frame period.
inline std::vector<MotionSignal> extract_motion(const BeamformedVoxelSeries& series)
{
    require(series.n_frames >= 7, "extract_motion: need at least 7 frames");
    const double h = 1.0 / series.frame_rate;
    const auto power = voxel_power(series);
    std::vector<MotionSignal> out;
    out.reserve(series.n_voxels());
    for (std::size_t v = 0; v < series.n_voxels(); ++v) {
        auto ph = extract_phase(series.voxel(v));
        if (!ph) continue;
        MotionSignal m;
        m.location = series.grid.center(v);
        m.acceleration = amplify_micromotion(ph->phase, h);
        m.phase = std::move(ph->phase);
        m.power = power[v];
        m.frame_rate = series.frame_rate;
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace cardiowave
