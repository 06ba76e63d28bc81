#pragma once

// Periodicity-based pattern matching used to decide which voxels carry
// cardiac motion: DTW distance, coarse templates, the overlapping
// segmentation DP, segment reform, linear-time-warp template update and the
// final matching score.

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "cardiowave/common.hpp"
#include "cardiowave/micromotion.hpp"

namespace cardiowave {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

/// True when cell (i, j) lies inside a Sakoe-Chiba band of half-width `band`
/// around the straight line joining (0,0) and (n-1, m-1). band == 0 disables it.
inline bool in_band(std::size_t i, std::size_t j, std::size_t n, std::size_t m, std::size_t band)
{
    if (band == 0 || n == 1 || m == 1) return true;
    const double centre = static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(n - 1);
    return std::abs(static_cast<double>(j) - centre) <= static_cast<double>(band);
}

} // namespace detail

/// DTW(S, T) = min over warping paths of sum (s_i - t_j)^2, steps (1,0),
/// (0,1), (1,1), from (0,0) to (n-1, m-1). O(n m) time, O(m) memory.
inline double dtw_distance(std::span<const double> s, std::span<const double> t, std::size_t band = 0)
{
    require(!s.empty() && !t.empty(), "dtw_distance: empty input");
    const std::size_t n = s.size();
    const std::size_t m = t.size();
    std::vector<double> prev(m, kInf);
    std::vector<double> cur(m, kInf);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!detail::in_band(i, j, n, m, band)) {
                cur[j] = kInf;
                continue;
            }
            const double diff = s[i] - t[j];
            const double d = diff * diff;
            double best;
            if (i == 0 && j == 0) best = 0.0;
            else if (i == 0) best = cur[j - 1];
            else if (j == 0) best = prev[j];
            else best = std::min(std::min(prev[j], prev[j - 1]), cur[j - 1]);
            cur[j] = d + best;
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

/// DTW(templ, signal[start, start + templ.size())) for every feasible start.
/// Starts are evaluated in lock-step batches so the inner loop vectorises;
/// each lane performs exactly the arithmetic of dtw_distance.
inline std::vector<double> window_costs(std::span<const double> signal, std::span<const double> templ,
                                        std::size_t band = 0)
{
    const std::size_t h = templ.size();
    require(h > 0 && signal.size() >= h, "window_costs: signal shorter than template");
    const std::size_t n_starts = signal.size() - h + 1;
    std::vector<double> out(n_starts);

    constexpr std::size_t L = 32;
    // row buffers: cell j of lane l lives at [j * L + l]
    std::vector<double> prev_buf(h * L), cur_buf(h * L);
    std::vector<std::pair<std::size_t, std::size_t>> cols(h, {0, h}); // admissible j range per row
    if (band > 0) {
        for (std::size_t i = 0; i < h; ++i) {
            std::size_t lo = h, hi = 0;
            for (std::size_t j = 0; j < h; ++j)
                if (detail::in_band(i, j, h, h, band)) { lo = std::min(lo, j); hi = j + 1; }
            cols[i] = {lo, hi};
        }
    }

    alignas(64) double sv[L];
    for (std::size_t base = 0; base < n_starts; base += L) {
        const std::size_t lanes = std::min(L, n_starts - base);
        double* prev = prev_buf.data();
        double* cur = cur_buf.data();
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t l = 0; l < L; ++l) sv[l] = signal[std::min(base + l, n_starts - 1) + i];
            const auto [jlo, jhi] = cols[i];
            for (std::size_t j = 0; j < jlo; ++j)
                for (std::size_t l = 0; l < L; ++l) cur[j * L + l] = kInf;
            for (std::size_t j = jhi; j < h; ++j)
                for (std::size_t l = 0; l < L; ++l) cur[j * L + l] = kInf;
            for (std::size_t j = jlo; j < jhi; ++j) {
                const double tj = templ[j];
                double* __restrict c = cur + j * L;
                if (i == 0 && j == 0) {
                    for (std::size_t l = 0; l < L; ++l) {
                        const double diff = tj - sv[l];
                        c[l] = diff * diff + 0.0;
                    }
                } else if (i == 0) {
                    const double* __restrict left = cur + (j - 1) * L;
                    for (std::size_t l = 0; l < L; ++l) {
                        const double diff = tj - sv[l];
                        c[l] = diff * diff + left[l];
                    }
                } else if (j == 0) {
                    const double* __restrict up = prev;
                    for (std::size_t l = 0; l < L; ++l) {
                        const double diff = tj - sv[l];
                        c[l] = diff * diff + up[l];
                    }
                } else {
                    const double* __restrict up = prev + j * L;
                    const double* __restrict diag = prev + (j - 1) * L;
                    const double* __restrict left = cur + (j - 1) * L;
                    for (std::size_t l = 0; l < L; ++l) {
                        const double diff = tj - sv[l];
                        const double best = std::min(std::min(up[l], diag[l]), left[l]);
                        c[l] = diff * diff + best;
                    }
                }
            }
            std::swap(prev, cur);
        }
        for (std::size_t l = 0; l < lanes; ++l) out[base + l] = prev[(h - 1) * L + l];
    }
    return out;
}

/// Non-overlapping windows of length h_max taken from the start of the signal.
inline std::vector<Series> coarse_templates(std::span<const double> signal, std::size_t h_max)
{
    require(h_max > 0, "coarse_templates: h_max must be positive");
    require(signal.size() >= h_max, "coarse_templates: signal shorter than h_max");
    std::vector<Series> out;
    for (std::size_t k = 0; (k + 1) * h_max <= signal.size(); ++k)
        out.emplace_back(signal.begin() + static_cast<std::ptrdiff_t>(k * h_max),
                         signal.begin() + static_cast<std::ptrdiff_t>((k + 1) * h_max));
    return out;
}

/// Start sequence of an overlapping segmentation and its summed window cost.
struct OverlapPlan {
    std::vector<std::size_t> starts;
    double objective = kInf;
};

/// Minimises sum_i costs[tau_i] over start sequences with
///   h_min <= tau_{i+1} - tau_i <= h_max,   at least three starts,
///   tau_1 < h_max,   n - 2 h_max < tau_last <= n - h_max,
/// i.e. no stretch of h_max samples is left uncovered at either end and the
/// reformed segmentation has at least two segments (a single segment always
/// matches its own template). costs[tau] is the cost of the window starting
/// at tau (size n - h_max + 1). Ties resolve to the earliest predecessor and
/// the earliest final start.
inline OverlapPlan segmentation_dp(std::span<const double> costs, std::size_t n, std::size_t h_min, std::size_t h_max)
{
    require(h_min > 0 && h_min <= h_max, "segmentation: need 0 < h_min <= h_max");
    require(n >= 2 * h_max, "segmentation: signal shorter than 2 h_max");
    require(n - h_max >= 2 * h_min, "segmentation: signal too short to place three starts");
    require(costs.size() == n - h_max + 1, "segmentation: cost vector has the wrong length");
    const std::size_t n_pos = n - h_max + 1;

    // best[k][tau]: minimal cost of a sequence ending at tau with k+1 starts (k = 2 means three or more)
    std::array<std::vector<double>, 3> best;
    std::array<std::vector<std::size_t>, 3> pred;
    std::array<std::vector<unsigned char>, 3> pred_state;
    for (int k = 0; k < 3; ++k) {
        best[k].assign(n_pos, kInf);
        pred[k].assign(n_pos, 0);
        pred_state[k].assign(n_pos, 0);
    }
    for (std::size_t tau = 0; tau < n_pos; ++tau) {
        if (tau < h_max) best[0][tau] = costs[tau];
        if (tau < h_min) continue;
        const std::size_t lo = tau >= h_max ? tau - h_max : 0;
        const std::size_t hi = tau - h_min;
        // k = 1 extends a one-start sequence; k = 2 extends a two-or-more-start sequence
        for (int k = 1; k < 3; ++k) {
            double b = kInf;
            std::size_t arg = 0;
            unsigned char from = 0;
            for (std::size_t p = lo; p <= hi; ++p) {
                for (int prev_k = (k == 1 ? 0 : 1); prev_k <= (k == 1 ? 0 : 2); ++prev_k) {
                    if (best[prev_k][p] < b) {
                        b = best[prev_k][p];
                        arg = p;
                        from = static_cast<unsigned char>(prev_k);
                    }
                }
            }
            if (b < kInf) {
                best[k][tau] = b + costs[tau];
                pred[k][tau] = arg;
                pred_state[k][tau] = from;
            }
        }
    }

    OverlapPlan plan;
    const std::size_t first_end = n + 1 > 2 * h_max ? n + 1 - 2 * h_max : 0;
    std::size_t end = n_pos;
    for (std::size_t tau = first_end; tau < n_pos; ++tau) {
        if (best[2][tau] < plan.objective) {
            plan.objective = best[2][tau];
            end = tau;
        }
    }
    require(end < n_pos, "segmentation: no feasible start sequence");

    std::size_t tau = end;
    int state = 2;
    while (true) {
        plan.starts.push_back(tau);
        if (state == 0) break;
        const int next = pred_state[static_cast<std::size_t>(state)][tau];
        tau = pred[static_cast<std::size_t>(state)][tau];
        state = next;
    }
    std::reverse(plan.starts.begin(), plan.starts.end());
    return plan;
}

/// Best overlapping matching segmentation of `signal` against template T
/// (|T| = h_max): per-start DTW costs followed by segmentation_dp.
inline OverlapPlan best_overlap_segmentation(std::span<const double> signal, std::span<const double> templ,
                                             std::size_t h_min, std::size_t h_max, std::size_t band = 0)
{
    require(templ.size() == h_max, "best_overlap_segmentation: template length must equal h_max");
    require(signal.size() >= 2 * h_max, "best_overlap_segmentation: signal shorter than 2 h_max");
    const auto costs = window_costs(signal, templ, band);
    return segmentation_dp(costs, signal.size(), h_min, h_max);
}

/// Half-open sample range [begin, end).
struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;
    [[nodiscard]] std::size_t size() const { return end - begin; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Consecutive overlap starts become the non-overlapping segments [tau_i, tau_{i+1}).
inline std::vector<Segment> reform_segments(std::span<const std::size_t> starts)
{
    require(starts.size() >= 2, "reform_segments: need at least two starts");
    std::vector<Segment> out;
    for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
        require(starts[i + 1] > starts[i], "reform_segments: starts must be increasing");
        out.push_back({starts[i], starts[i + 1]});
    }
    return out;
}

/// Linear time warp: resample x to `length` points, endpoints preserved.
inline Series ltw_resample(std::span<const double> x, std::size_t length)
{
    require(x.size() >= 2, "ltw_resample: need at least two samples");
    require(length >= 2, "ltw_resample: target length must be at least 2");
    Series out(length);
    const double scale = static_cast<double>(x.size() - 1) / static_cast<double>(length - 1);
    for (std::size_t j = 0; j < length; ++j) {
        const double pos = static_cast<double>(j) * scale;
        const auto k = std::min(static_cast<std::size_t>(pos), x.size() - 2);
        const double f = pos - static_cast<double>(k);
        out[j] = f == 0.0 ? x[k] : x[k] + f * (x[k + 1] - x[k]);
    }
    return out;
}

/// Uniform average of every segment linearly warped to h_max samples.
inline Series update_template(std::span<const std::span<const double>> segments, std::size_t h_max)
{
    require(!segments.empty(), "update_template: no segments");
    Series acc(h_max, 0.0);
    for (const auto& seg : segments) {
        require(seg.size() >= 2, "update_template: degenerate segment (length < 2)");
        const auto w = ltw_resample(seg, h_max);
        for (std::size_t j = 0; j < h_max; ++j) acc[j] += w[j];
    }
    const double inv = 1.0 / static_cast<double>(segments.size());
    for (double& v : acc) v *= inv;
    return acc;
}

inline Series update_template(std::span<const double> signal, std::span<const Segment> segments, std::size_t h_max)
{
    std::vector<std::span<const double>> views;
    views.reserve(segments.size());
    for (const auto& s : segments) {
        require(s.end <= signal.size() && s.begin < s.end, "update_template: segment outside signal");
        views.push_back(signal.subspan(s.begin, s.size()));
    }
    return update_template(std::span<const std::span<const double>>(views), h_max);
}

struct SegmentationParams {
    std::size_t h_min = 100;
    std::size_t h_max = 200;
    std::size_t band = 0;           // Sakoe-Chiba half-width for DTW, 0 = unconstrained
    std::size_t max_candidates = 0; // 0 = every coarse template; otherwise an evenly spaced subset
};

struct SegmentationResult {
    std::vector<std::size_t> overlap_starts;
    std::vector<Segment> segments;
    Series templ;
    std::size_t candidate = 0;   // index of the coarse template that won
    double raw_score = kInf;     // (1/l) sum DTW(T, S_i)
    double score = kInf;         // (1/l) sum DTW(T, S_i) / |S_i|
    double relative_score = kInf; // score / variance of the signal

    /// Lengths of the final segments, i.e. the recovered period series.
    [[nodiscard]] std::vector<std::size_t> periods() const
    {
        std::vector<std::size_t> p;
        for (const auto& s : segments) p.push_back(s.size());
        return p;
    }
};

/// Segment -> template alternation for a fixed starting template, then the score.
inline SegmentationResult segment_with_template(std::span<const double> signal, std::span<const double> templ,
                                                const SegmentationParams& prm)
{
    SegmentationResult r;
    r.overlap_starts = best_overlap_segmentation(signal, templ, prm.h_min, prm.h_max, prm.band).starts;
    r.segments = reform_segments(r.overlap_starts);
    r.templ = update_template(signal, r.segments, prm.h_max);
    double raw = 0.0;
    double norm = 0.0;
    for (const auto& s : r.segments) {
        const double d = dtw_distance(r.templ, signal.subspan(s.begin, s.size()), prm.band);
        raw += d;
        norm += d / static_cast<double>(s.size());
    }
    const double l = static_cast<double>(r.segments.size());
    r.raw_score = raw / l;
    r.score = norm / l;
    const double var = stats::variance(signal);
    r.relative_score = var > 0 ? r.score / var : 0.0;
    return r;
}

/// Periodicity matching score P(S): every coarse template candidate is run
/// through segmentation, reform and template update; the candidate with the
/// lowest per-sample score wins.
inline SegmentationResult matching_score(std::span<const double> signal, const SegmentationParams& prm = {})
{
    require(prm.h_min > 0 && prm.h_min <= prm.h_max, "matching_score: need 0 < h_min <= h_max");
    require(signal.size() >= 2 * prm.h_max, "matching_score: signal shorter than 2 h_max");
    require(signal.size() - prm.h_max >= 2 * prm.h_min, "matching_score: signal too short for two segments");
    const auto candidates = coarse_templates(signal, prm.h_max);
    std::vector<std::size_t> chosen;
    if (prm.max_candidates == 0 || candidates.size() <= prm.max_candidates) {
        for (std::size_t k = 0; k < candidates.size(); ++k) chosen.push_back(k);
    } else {
        for (std::size_t k = 0; k < prm.max_candidates; ++k)
            chosen.push_back(k * candidates.size() / prm.max_candidates);
    }

    SegmentationResult best;
    for (std::size_t k : chosen) {
        auto r = segment_with_template(signal, candidates[k], prm);
        r.candidate = k;
        if (r.score < best.score) best = std::move(r);
    }
    return best;
}

/// How the focus threshold thr_f is chosen.
struct FocusThreshold {
    enum class Mode { fixed, median };
    Mode mode = Mode::median;
    double value = 0.0; // used when mode == fixed

    static FocusThreshold fixed(double v) { return {Mode::fixed, v}; }
    static FocusThreshold median() { return {Mode::median, 0.0}; }
};

struct FocusParams {
    SegmentationParams segmentation;
    FocusThreshold threshold;
    std::size_t analysis_frames = 0; // score only the leading frames; 0 = whole series
};

struct FocusedSignal {
    std::size_t source = 0; // index into the input list
    SegmentationResult match;
};

struct FocusResult {
    enum class Status { ok, no_cardiac_signal };
    Status status = Status::ok;
    double threshold = 0.0;
    std::vector<double> scores; // relative score of every input signal
    std::vector<FocusedSignal> retained;
};

/// Scores each signal's acceleration series and keeps those with relative
/// score strictly below thr_f (lower DTW cost = stronger periodic match).
inline FocusResult focus_voxels(std::span<const MotionSignal> signals, const FocusParams& prm)
{
    require(!signals.empty(), "focus_voxels: no signals");
    FocusResult out;
    std::vector<SegmentationResult> matches;
    matches.reserve(signals.size());
    for (const auto& s : signals) {
        std::span<const double> x(s.acceleration);
        if (prm.analysis_frames > 0 && x.size() > prm.analysis_frames) x = x.first(prm.analysis_frames);
        matches.push_back(matching_score(x, prm.segmentation));
        out.scores.push_back(matches.back().relative_score);
    }

    switch (prm.threshold.mode) {
    case FocusThreshold::Mode::fixed: out.threshold = prm.threshold.value; break;
    case FocusThreshold::Mode::median: out.threshold = stats::median(out.scores); break;
    }

    for (std::size_t i = 0; i < signals.size(); ++i)
        if (out.scores[i] < out.threshold) out.retained.push_back({i, std::move(matches[i])});
    if (out.retained.empty()) out.status = FocusResult::Status::no_cardiac_signal;
    return out;
}

} // namespace cardiowave
