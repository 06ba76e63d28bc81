#include <gtest/gtest.h>

#include <sstream>

#include "cardiowave/eval_metrics.hpp"
#include "cardiowave/radar_sim.hpp"

using namespace cardiowave;

namespace {

// Evenly spaced beats with fixed offsets of Q, S, T around R.
std::vector<BeatAnnotation> beats(std::size_t count, std::uint32_t period = 200, std::uint32_t first = 100)
{
    std::vector<BeatAnnotation> out;
    for (std::size_t k = 0; k < count; ++k) {
        BeatAnnotation b;
        b.r = first + static_cast<std::uint32_t>(k) * period;
        b.q = b.r - 8;
        b.s = b.r + 8;
        b.t = b.r + 50;
        out.push_back(b);
    }
    return out;
}

} // namespace

TEST(Delineate, RecoversGeneratorAnnotations)
{
    const auto ecg = synth_ecg(60.0, HeartRateProfile::ramp(60.0, 90.0, 60.0), 3);
    const auto d = delineate(ecg);
    ASSERT_EQ(d.status, DelineationResult::Status::ok);
    std::size_t hit = 0;
    for (const auto& truth : ecg.beats) {
        for (const auto& b : d.beats)
            if (std::abs(static_cast<long>(b.r) - static_cast<long>(truth.r)) <= 1) {
                ++hit;
                break;
            }
    }
    EXPECT_GE(static_cast<double>(hit), 0.99 * static_cast<double>(ecg.beats.size()));
    EXPECT_EQ(d.beats.size(), ecg.beats.size());
}

TEST(Delineate, EventsAreOrderedWithinEachBeat)
{
    const auto ecg = synth_ecg(30.0, HeartRateProfile::constant(75.0), 4);
    const auto d = delineate(ecg);
    ASSERT_FALSE(d.beats.empty());
    for (const auto& b : d.beats) {
        ASSERT_NE(b.r, kNoIndex);
        if (b.q != kNoIndex) {
            EXPECT_LT(b.q, b.r);
        }
        if (b.s != kNoIndex) {
            EXPECT_LT(b.r, b.s);
        }
        if (b.s != kNoIndex && b.t != kNoIndex) {
            EXPECT_LT(b.s, b.t);
        }
    }
    ASSERT_EQ(d.rr_valid.size(), d.beats.size());
    EXPECT_FALSE(d.rr_valid.front());
    for (std::size_t k = 1; k < d.rr_valid.size(); ++k) EXPECT_TRUE(d.rr_valid[k]); // 75 BPM = 160 frames
}

TEST(Delineate, ConstantSignalHasNoBeats)
{
    EcgTrace flat;
    flat.samples.assign(1000, 0.3);
    const auto d = delineate(flat);
    EXPECT_EQ(d.status, DelineationResult::Status::flat_signal);
    EXPECT_TRUE(d.beats.empty());
}

TEST(Delineate, ShiftByTenSamplesShiftsEveryIndexByTen)
{
    const auto ecg = synth_ecg(20.0, HeartRateProfile::constant(70.0), 5);
    EcgTrace shifted = ecg;
    shifted.samples.insert(shifted.samples.begin(), 10, 0.0);
    const auto a = delineate(ecg);
    const auto b = delineate(shifted);
    ASSERT_EQ(a.beats.size(), b.beats.size());
    auto plus = [](std::uint32_t i) { return i == kNoIndex ? kNoIndex : i + 10; };
    for (std::size_t k = 0; k < a.beats.size(); ++k) {
        EXPECT_EQ(b.beats[k].q, plus(a.beats[k].q));
        EXPECT_EQ(b.beats[k].r, plus(a.beats[k].r));
        EXPECT_EQ(b.beats[k].s, plus(a.beats[k].s));
        EXPECT_EQ(b.beats[k].t, plus(a.beats[k].t));
    }
}

TEST(Delineate, RejectsShortSignal)
{
    EcgTrace e;
    e.samples.assign(399, 0.0);
    EXPECT_THROW(delineate(e), InvalidArgument);
}

TEST(TimingErrors, IdenticalIsZero)
{
    const auto t = beats(20);
    const auto e = timing_errors(t, t, 200.0);
    EXPECT_EQ(e.matched, 20u);
    EXPECT_EQ(e.unmatched_truth, 0u);
    for (int k = 0; k < 4; ++k) {
        ASSERT_EQ(e.absolute_ms[k].size(), 20u);
        for (double v : e.absolute_ms[k]) EXPECT_EQ(v, 0.0);
    }
}

TEST(TimingErrors, OneFrameIsFiveMsAndHalfAPercentOfOneSecond)
{
    const auto t = beats(20, 200);
    auto p = t;
    for (auto& b : p) ++b.r;
    const auto e = timing_errors(p, t, 200.0);
    for (double v : e.absolute_ms[1]) EXPECT_EQ(v, 5.0);
    for (double v : e.normalized_pct[1]) EXPECT_DOUBLE_EQ(v, 0.5);
    for (double v : e.absolute_ms[0]) EXPECT_EQ(v, 0.0);
}

TEST(TimingErrors, CountsUnmatchedAndThrowsWhenNothingMatches)
{
    const auto t = beats(10);
    std::vector<BeatAnnotation> p(t.begin(), t.begin() + 7);
    EXPECT_EQ(timing_errors(p, t, 200.0).unmatched_truth, 3u);
    EXPECT_THROW(timing_errors(std::vector<BeatAnnotation>{}, t, 200.0), Error);
}

TEST(MatchBeats, IsOneToOneWithinTolerance)
{
    const auto t = beats(3);
    auto p = t;
    p.push_back(t[1]); // duplicate prediction must not match twice
    p.back().r += 2;
    const auto m = match_beats(p, t, 200.0);
    ASSERT_EQ(m.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(m[k], std::make_pair(k, k));
    auto far = t;
    for (auto& b : far) b.r += 31; // 155 ms
    EXPECT_TRUE(match_beats(far, t, 200.0).empty());
}

namespace {

EcgTrace wave(std::size_t n, const std::vector<BeatAnnotation>& b)
{
    EcgTrace e;
    e.samples.assign(n, 0.0);
    for (const auto& x : b)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (static_cast<double>(i) - x.r) / 4.0;
            e.samples[i] += std::exp(-0.5 * d * d) + 0.2 * std::sin(0.05 * static_cast<double>(i));
        }
    return e;
}

} // namespace

TEST(Morphology, IdenticalOffsetAndNegated)
{
    const auto b = beats(10);
    const auto truth = wave(2000, b);
    const auto same = morphology(truth, truth, b);
    ASSERT_EQ(same.pearson.size(), 10u);
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_NEAR(same.pearson[k], 1.0, 1e-12);
        EXPECT_EQ(same.rmse[k], 0.0);
    }
    auto offset = truth;
    for (double& v : offset.samples) v += 0.1;
    const auto off = morphology(offset, truth, b);
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_NEAR(off.pearson[k], 1.0, 1e-12);
        EXPECT_NEAR(off.rmse[k], 0.1, 1e-12);
    }
    auto neg = truth;
    for (double& v : neg.samples) v = -v;
    for (double c : morphology(neg, truth, b).pearson) EXPECT_NEAR(c, -1.0, 1e-12);
}

TEST(Morphology, FlatWindowIsExcludedAndCounted)
{
    const auto b = beats(4);
    const auto truth = wave(800, b);
    EcgTrace pred = truth;
    std::fill(pred.samples.begin() + 200, pred.samples.begin() + 400, 0.0); // covers the second window
    const auto r = morphology(pred, truth, b);
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_EQ(r.pearson.size(), 3u);
}

TEST(FalseMonitoring, CountsByTheToleranceRule)
{
    const auto t = beats(100);
    EXPECT_EQ(false_monitoring_ratio(t, t, 200.0), 0.0);

    auto no_t = t;
    for (auto& b : no_t) b.t = kNoIndex;
    EXPECT_EQ(false_monitoring_ratio(no_t, t, 200.0), 100.0);

    auto one_off = t;
    one_off[37].r += 40; // 200 ms
    one_off[37].q += 40;
    one_off[37].s += 40;
    one_off[37].t += 40;
    EXPECT_EQ(false_monitoring_ratio(one_off, t, 200.0), 1.0);

    auto t_late = t; // T off by exactly the tolerance is still fine, one more frame is not
    t_late[3].t += 30;
    t_late[4].t += 31;
    EXPECT_EQ(false_monitoring_ratio(t_late, t, 200.0), 1.0);

    EXPECT_THROW(false_monitoring_ratio(t, std::vector<BeatAnnotation>{}, 200.0), Error);
}

TEST(RrErrors, ZeroUniformShiftAndAlternatingJitter)
{
    const auto t = beats(30, 160);
    for (double v : rr_errors(t, t, 200.0).all_ms) EXPECT_EQ(v, 0.0);

    auto shifted = t;
    for (auto& b : shifted) b.r += 3;
    const auto s = rr_errors(shifted, t, 200.0);
    ASSERT_EQ(s.all_ms.size(), 29u);
    for (double v : s.all_ms) EXPECT_EQ(v, 0.0);

    auto jitter = t;
    for (std::size_t k = 0; k < jitter.size(); ++k) jitter[k].r = k % 2 ? jitter[k].r + 1 : jitter[k].r - 1;
    const auto j = rr_errors(jitter, t, 200.0);
    for (double v : j.all_ms) EXPECT_EQ(v, 10.0);
    EXPECT_EQ(j.below_100_bpm.size(), 29u); // 160 frames = 75 BPM
    EXPECT_TRUE(j.above_100_bpm.empty());

    EXPECT_THROW(rr_errors(std::vector<BeatAnnotation>(t.begin(), t.begin() + 1), t, 200.0), Error);
}

TEST(RrErrors, FastBeatsGoToTheUpperBucket)
{
    const auto t = beats(10, 100); // 120 BPM
    const auto e = rr_errors(t, t, 200.0);
    EXPECT_TRUE(e.below_100_bpm.empty());
    EXPECT_EQ(e.above_100_bpm.size(), 9u);
}

TEST(SegmentPeriodErrors, SegmentsAtAFixedPhaseMatchTruthIntervals)
{
    std::vector<std::uint32_t> r{100, 280, 450, 640, 800, 990};
    std::vector<Segment> segs;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) segs.push_back({r[k] + 37, r[k + 1] + 37});
    for (double e : segment_period_errors(segs, r, 200.0)) EXPECT_EQ(e, 0.0);
    segs[2].end += 2;
    segs[3].begin += 2;
    const auto e = segment_period_errors(segs, r, 200.0);
    EXPECT_EQ(stats::median(e), 0.0);
    EXPECT_EQ(*std::max_element(e.begin(), e.end()), 10.0);
}

TEST(Evaluate, TruthAgainstItselfIsExactlyZero)
{
    const auto ecg = synth_ecg(30.0, HeartRateProfile::ramp(60.0, 90.0, 30.0), 6);
    const auto rep = evaluate(ecg, ecg);
    EXPECT_EQ(rep.false_monitoring_pct, 0.0);
    EXPECT_EQ(rep.matched_beats, rep.truth_beats);
    for (int e = 0; e < 4; ++e) {
        EXPECT_EQ(rep.timing_ms[e].median, 0.0);
        EXPECT_EQ(rep.timing_ms[e].p90, 0.0);
    }
    EXPECT_EQ(rep.rr_ms.median, 0.0);
    EXPECT_EQ(rep.rmse_mv.p90, 0.0);
    EXPECT_NEAR(rep.pearson.median, 1.0, 1e-12);
}

TEST(Evaluate, OneFrameShiftGivesFiveMsAndNoRrError)
{
    const auto ecg = synth_ecg(30.0, HeartRateProfile::constant(72.0), 7);
    EcgTrace late = ecg;
    late.samples.insert(late.samples.begin(), 0.0);
    const auto rep = evaluate(late, ecg);
    EXPECT_EQ(rep.timing_ms[1].median, 5.0);
    EXPECT_EQ(rep.timing_ms[1].p90, 5.0);
    EXPECT_EQ(rep.rr_ms.median, 0.0);
    EXPECT_EQ(rep.rr_ms.p90, 0.0);
}

TEST(Evaluate, JsonReportAndCdfCsv)
{
    const auto ecg = synth_ecg(10.0, HeartRateProfile::constant(72.0), 8);
    const auto rep = evaluate(ecg, ecg);
    const auto j = to_json(rep);
    EXPECT_EQ(j["timing_error_ms"]["R"]["median"], 0.0);
    EXPECT_EQ(j["false_monitoring_pct"], 0.0);
    EXPECT_EQ(j["beats"]["truth"], rep.truth_beats);
    EXPECT_TRUE(j["rr_error_ms"]["above_100_bpm"]["median"].is_null());

    std::ostringstream csv;
    write_cdf_csv(csv, rep);
    const std::string text = csv.str();
    EXPECT_EQ(text.rfind("metric,value,probability\n", 0), 0u);
    EXPECT_NE(text.find("timing_ms_R,0,"), std::string::npos);
    EXPECT_NE(text.find("rr_ms,0,1\n"), std::string::npos);
}
