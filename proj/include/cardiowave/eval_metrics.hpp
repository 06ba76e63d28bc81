#pragma once

// ECG delineation and the evaluation metrics: per-event timing error, per-beat
// morphology, the 150 ms false-monitoring rule and R-R interval error.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cardiowave/common.hpp"
#include "cardiowave/ecg.hpp"
#include "cardiowave/focus.hpp"

namespace cardiowave {

struct DelineatorParams {
    std::uint32_t refractory = 50;     // frames; half of h_min
    double height_fraction = 0.3;      // of the largest band-passed peak
    std::uint32_t qs_window = 12;      // 60 ms at 200 Hz
    std::uint32_t t_from = 16;         // 80 ms after R
    std::uint32_t t_to = 80;           // 400 ms after R
    std::uint32_t h_min = 100;
    std::uint32_t h_max = 200;
};

struct DelineationResult {
    enum class Status { ok, flat_signal };
    Status status = Status::ok;
    std::vector<BeatAnnotation> beats;  // P is never filled
    std::vector<bool> rr_valid;         // interval ending at beat i lies in [h_min, h_max]; beat 0 is false
};

namespace detail {

// Centred moving average with zero extension. Each output sums its own window
// so a zero-padded shift of the input shifts the output exactly.
inline Series centred_average(std::span<const double> x, std::size_t half)
{
    const std::size_t n = x.size();
    Series out(n, 0.0);
    const double inv = 1.0 / static_cast<double>(2 * half + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += x[k];
        out[i] = acc * inv;
    }
    return out;
}

inline bool local_min(std::span<const double> x, std::size_t i)
{
    return i > 0 && i + 1 < x.size() && x[i] <= x[i - 1] && x[i] < x[i + 1];
}

} // namespace detail

/// R peaks from a band-passed trace (difference of a short and a long centred
/// moving average), largest first with a refractory gap, each refined to the
/// raw maximum within +-3 samples. Q and S are the nearest local minima of the
/// raw trace on either side within qs_window; T is the raw maximum between
/// t_from and t_to samples after R.
inline DelineationResult delineate(const EcgTrace& ecg, const DelineatorParams& prm = {})
{
    const std::span<const double> x(ecg.samples);
    require(x.size() >= 2u * ecg.sample_rate, "delineate: need at least 2 s of signal");
    DelineationResult out;
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (!(*mx - *mn > 1e-9)) {
        out.status = DelineationResult::Status::flat_signal;
        return out;
    }

    const Series fast = detail::centred_average(x, 1);
    const Series slow = detail::centred_average(x, 20);
    Series band(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) band[i] = fast[i] - slow[i];
    const double top = *std::max_element(band.begin(), band.end());
    if (!(top > 0)) {
        out.status = DelineationResult::Status::flat_signal;
        return out;
    }

    std::vector<std::size_t> cand;
    for (std::size_t i = 1; i + 1 < band.size(); ++i)
        if (band[i] > band[i - 1] && band[i] >= band[i + 1] && band[i] >= prm.height_fraction * top) cand.push_back(i);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return band[a] > band[b]; });
    std::vector<std::size_t> peaks;
    for (std::size_t c : cand) {
        bool clear = true;
        for (std::size_t p : peaks)
            if ((c > p ? c - p : p - c) < prm.refractory) clear = false;
        if (clear) peaks.push_back(c);
    }
    std::sort(peaks.begin(), peaks.end());

    const std::size_t n = x.size();
    for (std::size_t p : peaks) {
        const std::size_t lo = p >= 3 ? p - 3 : 0;
        const std::size_t hi = std::min(n - 1, p + 3);
        std::size_t r = lo;
        for (std::size_t k = lo; k <= hi; ++k)
            if (x[k] > x[r]) r = k;
        BeatAnnotation b;
        b.r = static_cast<std::uint32_t>(r);
        for (std::size_t d = 1; d <= prm.qs_window && d <= r; ++d)
            if (detail::local_min(x, r - d)) {
                b.q = static_cast<std::uint32_t>(r - d);
                break;
            }
        for (std::size_t d = 1; d <= prm.qs_window && r + d < n; ++d)
            if (detail::local_min(x, r + d)) {
                b.s = static_cast<std::uint32_t>(r + d);
                break;
            }
        const std::size_t t_lo = r + prm.t_from;
        const std::size_t t_hi = std::min(n - 2, r + prm.t_to);
        if (t_lo <= t_hi) {
            std::size_t t = t_lo;
            for (std::size_t k = t_lo; k <= t_hi; ++k)
                if (x[k] > x[t]) t = k;
            if (t > 0 && x[t] > x[t - 1] && x[t] >= x[t + 1]) b.t = static_cast<std::uint32_t>(t);
        }
        out.beats.push_back(b);
    }
    for (std::size_t i = 0; i < out.beats.size(); ++i) {
        if (i == 0) {
            out.rr_valid.push_back(false);
            continue;
        }
        const std::uint32_t rr = out.beats[i].r - out.beats[i - 1].r;
        out.rr_valid.push_back(rr >= prm.h_min && rr <= prm.h_max);
    }
    return out;
}

/// One-to-one pairing (pred index, truth index) of beats whose R peaks are
/// within tolerance, taken greedily by increasing distance.
inline std::vector<std::pair<std::size_t, std::size_t>> match_beats(std::span<const BeatAnnotation> pred,
                                                                    std::span<const BeatAnnotation> truth,
                                                                    double frame_rate, double tolerance_ms = 150.0)
{
    struct Cand {
        double d;
        std::size_t p, t;
    };
    std::vector<Cand> cands;
    const double tol = tolerance_ms * frame_rate / 1000.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].r == kNoIndex) continue;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (truth[j].r == kNoIndex) continue;
            const double d = std::abs(static_cast<double>(pred[i].r) - static_cast<double>(truth[j].r));
            if (d <= tol) cands.push_back({d, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.t != b.t) return a.t < b.t;
        return a.p < b.p;
    });
    std::vector<bool> used_p(pred.size()), used_t(truth.size());
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : cands) {
        if (used_p[c.p] || used_t[c.t]) continue;
        used_p[c.p] = used_t[c.t] = true;
        out.emplace_back(c.p, c.t);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    return out;
}

enum class Event { q = 0, r = 1, s = 2, t = 3 };
inline constexpr std::array<const char*, 4> kEventNames = {"Q", "R", "S", "T"};

inline std::uint32_t event_index(const BeatAnnotation& b, Event e)
{
    switch (e) {
    case Event::q: return b.q;
    case Event::r: return b.r;
    case Event::s: return b.s;
    case Event::t: return b.t;
    }
    return kNoIndex;
}

struct TimingErrors {
    std::array<Series, 4> absolute_ms;    // Q, R, S, T
    std::array<Series, 4> normalized_pct; // absolute / local truth beat period
    std::size_t matched = 0;
    std::size_t unmatched_truth = 0;
};

namespace detail {

// Local truth beat period (frames): interval to the next R, or to the previous one for the last beat.
inline double truth_period(std::span<const BeatAnnotation> truth, std::size_t j)
{
    if (truth.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    if (j + 1 < truth.size()) return static_cast<double>(truth[j + 1].r) - static_cast<double>(truth[j].r);
    return static_cast<double>(truth[j].r) - static_cast<double>(truth[j - 1].r);
}

} // namespace detail

inline TimingErrors timing_errors(std::span<const BeatAnnotation> pred, std::span<const BeatAnnotation> truth,
                                  double frame_rate)
{
    const auto pairs = match_beats(pred, truth, frame_rate);
    if (pairs.empty()) throw Error("timing_errors: no matched beats");
    TimingErrors out;
    out.matched = pairs.size();
    out.unmatched_truth = truth.size() - pairs.size();
    const double ms = 1000.0 / frame_rate;
    for (const auto& [p, t] : pairs) {
        const double period = detail::truth_period(truth, t);
        for (int e = 0; e < 4; ++e) {
            const auto a = event_index(pred[p], static_cast<Event>(e));
            const auto b = event_index(truth[t], static_cast<Event>(e));
            if (a == kNoIndex || b == kNoIndex) continue;
            const double err = std::abs(static_cast<double>(a) - static_cast<double>(b));
            out.absolute_ms[e].push_back(err * ms);
            if (std::isfinite(period) && period > 0) out.normalized_pct[e].push_back(100.0 * err / period);
        }
    }
    return out;
}

struct MorphologyResult {
    Series pearson;
    Series rmse;               // same unit as the traces (mV)
    std::size_t excluded = 0;  // windows with zero variance on either side
};

/// Per truth beat window: the window of beat k runs from halfway to the
/// previous R to halfway to the next R (trace ends for the outer beats).
inline MorphologyResult morphology(const EcgTrace& pred, const EcgTrace& truth, std::span<const BeatAnnotation> beats)
{
    require(pred.samples.size() == truth.samples.size(), "morphology: traces differ in length");
    require(pred.sample_rate == truth.sample_rate, "morphology: sample rates differ");
    MorphologyResult out;
    const std::size_t n = truth.samples.size();
    std::vector<std::size_t> r;
    for (const auto& b : beats)
        if (b.r != kNoIndex) r.push_back(b.r);
    for (std::size_t k = 0; k < r.size(); ++k) {
        const std::size_t lo = k == 0 ? (r.size() > 1 ? r[0] - std::min(r[0], (r[1] - r[0]) / 2) : 0)
                                      : r[k - 1] + (r[k] - r[k - 1]) / 2;
        const std::size_t hi = k + 1 == r.size() ? (r.size() > 1 ? std::min(n, r[k] + (r[k] - r[k - 1]) / 2) : n)
                                                 : r[k] + (r[k + 1] - r[k]) / 2;
        if (hi <= lo + 1) {
            ++out.excluded;
            continue;
        }
        const std::span<const double> a(pred.samples.data() + lo, hi - lo);
        const std::span<const double> b(truth.samples.data() + lo, hi - lo);
        const double c = stats::pearson(a, b);
        if (!std::isfinite(c)) {
            ++out.excluded;
            continue;
        }
        out.pearson.push_back(c);
        out.rmse.push_back(stats::rmse(a, b));
    }
    return out;
}

/// Percentage of truth beats that fail the tolerance rule: the beat must be
/// matched and every Q, R, S, T present in truth must exist in the prediction
/// within tolerance.
inline double false_monitoring_ratio(std::span<const BeatAnnotation> pred, std::span<const BeatAnnotation> truth,
                                     double frame_rate, double tolerance_ms = 150.0)
{
    if (truth.empty()) throw Error("false_monitoring_ratio: no truth beats");
    const auto pairs = match_beats(pred, truth, frame_rate, tolerance_ms);
    std::vector<bool> ok(truth.size(), false);
    const double tol = tolerance_ms * frame_rate / 1000.0;
    for (const auto& [p, t] : pairs) {
        bool good = true;
        for (int e = 0; e < 4; ++e) {
            const auto a = event_index(pred[p], static_cast<Event>(e));
            const auto b = event_index(truth[t], static_cast<Event>(e));
            if (b == kNoIndex) continue;
            if (a == kNoIndex || std::abs(static_cast<double>(a) - static_cast<double>(b)) > tol) good = false;
        }
        ok[t] = good;
    }
    const auto bad = std::count(ok.begin(), ok.end(), false);
    return 100.0 * static_cast<double>(bad) / static_cast<double>(truth.size());
}

struct RrErrors {
    Series all_ms;
    Series below_100_bpm;
    Series above_100_bpm; // truth rate >= 100 BPM
};

/// |pred RR - truth RR| for each pair of consecutive truth beats that are both matched.
inline RrErrors rr_errors(std::span<const BeatAnnotation> pred, std::span<const BeatAnnotation> truth,
                          double frame_rate)
{
    const auto pairs = match_beats(pred, truth, frame_rate);
    if (pairs.size() < 2) throw Error("rr_errors: fewer than two matched R peaks");
    RrErrors out;
    const double ms = 1000.0 / frame_rate;
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
        const auto [p0, t0] = pairs[i];
        const auto [p1, t1] = pairs[i + 1];
        if (t1 != t0 + 1) continue;
        const double truth_rr = static_cast<double>(truth[t1].r) - static_cast<double>(truth[t0].r);
        const double pred_rr = static_cast<double>(pred[p1].r) - static_cast<double>(pred[p0].r);
        const double err = std::abs(pred_rr - truth_rr) * ms;
        out.all_ms.push_back(err);
        const double bpm = 60.0 * frame_rate / truth_rr;
        (bpm < 100.0 ? out.below_100_bpm : out.above_100_bpm).push_back(err);
    }
    return out;
}

/// Compares a segmentation's recovered periods with the truth R-R intervals.
/// The segment boundaries sit at a fixed but unknown phase of the cardiac
/// cycle, so a constant offset (within +-max_offset frames) is chosen that
/// minimises the median distance from each shifted boundary to its nearest
/// truth R. Each segment is then compared with the truth interval that starts
/// at that R. Returns absolute errors in ms.
inline Series segment_period_errors(std::span<const Segment> segments, std::span<const std::uint32_t> truth_r,
                                    double frame_rate, long max_offset = 200)
{
    require(truth_r.size() >= 2, "segment_period_errors: need two truth R peaks");
    require(!segments.empty(), "segment_period_errors: no segments");
    auto nearest = [&](double pos) {
        const auto it = std::lower_bound(truth_r.begin(), truth_r.end(), pos,
                                         [](std::uint32_t r, double v) { return static_cast<double>(r) < v; });
        std::size_t j = static_cast<std::size_t>(std::distance(truth_r.begin(), it));
        if (j == truth_r.size()) return j - 1;
        if (j > 0 && pos - truth_r[j - 1] <= truth_r[j] - pos) return j - 1;
        return j;
    };
    long best_offset = 0;
    double best = std::numeric_limits<double>::infinity();
    for (long d = -max_offset; d <= max_offset; ++d) {
        Series gaps;
        for (const auto& s : segments) {
            const double pos = static_cast<double>(s.begin) + static_cast<double>(d);
            gaps.push_back(std::abs(pos - truth_r[nearest(pos)]));
        }
        const double m = stats::median(gaps);
        if (m < best) {
            best = m;
            best_offset = d;
        }
    }
    Series err;
    const double ms = 1000.0 / frame_rate;
    for (const auto& s : segments) {
        const std::size_t j = nearest(static_cast<double>(s.begin) + static_cast<double>(best_offset));
        if (j + 1 >= truth_r.size()) continue;
        const double truth_rr = static_cast<double>(truth_r[j + 1]) - static_cast<double>(truth_r[j]);
        err.push_back(std::abs(static_cast<double>(s.size()) - truth_rr) * ms);
    }
    return err;
}

struct Summary {
    double median = std::numeric_limits<double>::quiet_NaN();
    double p90 = std::numeric_limits<double>::quiet_NaN();
    std::size_t count = 0;

    static Summary of(const Series& x)
    {
        Summary s;
        s.count = x.size();
        if (!x.empty()) {
            s.median = stats::median(x);
            s.p90 = stats::quantile(x, 0.9);
        }
        return s;
    }
};

struct MetricsReport {
    std::array<Summary, 4> timing_ms;
    std::array<Summary, 4> timing_normalized_pct;
    Summary pearson;
    Summary rmse_mv;
    double false_monitoring_pct = 0.0;
    Summary rr_ms;
    Summary rr_below_100_bpm_ms;
    Summary rr_above_100_bpm_ms;
    std::size_t truth_beats = 0;
    std::size_t pred_beats = 0;
    std::size_t matched_beats = 0;
    std::size_t excluded_windows = 0;

    // raw samples kept for CDF output
    TimingErrors timing;
    MorphologyResult morph;
    RrErrors rr;
};

/// Delineates both traces and computes every metric.
inline MetricsReport evaluate(const EcgTrace& pred, const EcgTrace& truth, const DelineatorParams& prm = {})
{
    require(pred.sample_rate == truth.sample_rate, "evaluate: sample rates differ");
    const auto dt = delineate(truth, prm);
    const auto dp = delineate(pred, prm);
    if (dt.beats.empty()) throw Error("evaluate: no beats found in the truth trace");
    const double fs = truth.sample_rate;
    MetricsReport rep;
    rep.truth_beats = dt.beats.size();
    rep.pred_beats = dp.beats.size();
    rep.false_monitoring_pct = false_monitoring_ratio(dp.beats, dt.beats, fs);
    if (!match_beats(dp.beats, dt.beats, fs).empty()) {
        rep.timing = timing_errors(dp.beats, dt.beats, fs);
        rep.matched_beats = rep.timing.matched;
        for (int e = 0; e < 4; ++e) {
            rep.timing_ms[e] = Summary::of(rep.timing.absolute_ms[e]);
            rep.timing_normalized_pct[e] = Summary::of(rep.timing.normalized_pct[e]);
        }
    }
    if (rep.matched_beats >= 2) {
        rep.rr = rr_errors(dp.beats, dt.beats, fs);
        rep.rr_ms = Summary::of(rep.rr.all_ms);
        rep.rr_below_100_bpm_ms = Summary::of(rep.rr.below_100_bpm);
        rep.rr_above_100_bpm_ms = Summary::of(rep.rr.above_100_bpm);
    }
    if (pred.samples.size() == truth.samples.size()) {
        rep.morph = morphology(pred, truth, dt.beats);
        rep.pearson = Summary::of(rep.morph.pearson);
        rep.rmse_mv = Summary::of(rep.morph.rmse);
        rep.excluded_windows = rep.morph.excluded;
    }
    return rep;
}

inline nlohmann::json to_json(const Summary& s)
{
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"median", num(s.median)}, {"p90", num(s.p90)}, {"count", s.count}};
}

inline nlohmann::json to_json(const MetricsReport& r)
{
    nlohmann::json j;
    for (int e = 0; e < 4; ++e) {
        j["timing_error_ms"][kEventNames[e]] = to_json(r.timing_ms[e]);
        j["timing_error_normalized_pct"][kEventNames[e]] = to_json(r.timing_normalized_pct[e]);
    }
    j["pearson"] = to_json(r.pearson);
    j["rmse_mv"] = to_json(r.rmse_mv);
    j["false_monitoring_pct"] = r.false_monitoring_pct;
    j["rr_error_ms"] = {{"all", to_json(r.rr_ms)},
                        {"below_100_bpm", to_json(r.rr_below_100_bpm_ms)},
                        {"above_100_bpm", to_json(r.rr_above_100_bpm_ms)}};
    j["beats"] = {{"truth", r.truth_beats},
                  {"pred", r.pred_beats},
                  {"matched", r.matched_beats},
                  {"excluded_windows", r.excluded_windows}};
    return j;
}

/// Empirical CDF rows "metric,value,probability" for every sample kept in the report.
inline void write_cdf_csv(std::ostream& os, const MetricsReport& r)
{
    os << "metric,value,probability\n";
    auto emit = [&](const std::string& name, Series x) {
        std::sort(x.begin(), x.end());
        for (std::size_t i = 0; i < x.size(); ++i)
            os << name << ',' << x[i] << ',' << static_cast<double>(i + 1) / static_cast<double>(x.size()) << '\n';
    };
    for (int e = 0; e < 4; ++e) {
        emit(std::string("timing_ms_") + kEventNames[e], r.timing.absolute_ms[e]);
        emit(std::string("timing_pct_") + kEventNames[e], r.timing.normalized_pct[e]);
    }
    emit("pearson", r.morph.pearson);
    emit("rmse_mv", r.morph.rmse);
    emit("rr_ms", r.rr.all_ms);
}

} // namespace cardiowave
