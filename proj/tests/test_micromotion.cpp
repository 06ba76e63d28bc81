#include <gtest/gtest.h>

#include <numeric>

#include "cardiowave/micromotion.hpp"
#include "cardiowave/radar_sim.hpp"
#include "oracles.hpp"

using namespace cardiowave;

TEST(ExtractPhase, ConstantSeriesGivesConstantPhase)
{
    const std::vector<cdouble> s(50, std::polar(2.0, 1.2));
    const auto ph = extract_phase(s);
    ASSERT_TRUE(ph);
    for (double v : ph->phase) EXPECT_DOUBLE_EQ(v, ph->phase.front());
    EXPECT_NEAR(ph->phase.front(), 1.2, 1e-15);
}

TEST(ExtractPhase, RampIsUnwrappedWithoutJumps)
{
    std::vector<cdouble> s;
    const std::size_t n = 400;
    for (std::size_t i = 0; i < n; ++i) s.push_back(std::polar(1.0, 4.0 * kPi * i / (n - 1)));
    const auto ph = extract_phase(s);
    ASSERT_TRUE(ph);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ph->phase[i], 4.0 * kPi * i / (n - 1), 1e-12);
    for (std::size_t i = 1; i < n; ++i) EXPECT_LT(std::abs(ph->phase[i] - ph->phase[i - 1]), kPi);
}

TEST(ExtractPhase, FirstSampleFoldedIntoHalfOpenRange)
{
    const std::vector<cdouble> s(10, cdouble(-1.0, 0.0)); // arg = +pi
    const auto ph = extract_phase(s);
    ASSERT_TRUE(ph);
    EXPECT_DOUBLE_EQ(ph->phase.front(), -kPi);
}

TEST(ExtractPhase, ZeroFramesAreInterpolated)
{
    std::vector<cdouble> s;
    for (int i = 0; i < 40; ++i) s.push_back(std::polar(1.0, 0.01 * i));
    s[10] = 0.0;
    s[11] = 0.0;
    const auto ph = extract_phase(s);
    ASSERT_TRUE(ph);
    EXPECT_EQ(ph->unreliable, 2u);
    EXPECT_NEAR(ph->phase[10], 0.10, 1e-12);
    EXPECT_NEAR(ph->phase[11], 0.11, 1e-12);
}

TEST(ExtractPhase, RejectsMoreThanTenPercentUnreliable)
{
    std::vector<cdouble> s(100, cdouble(1.0, 0.0));
    for (int i = 0; i < 10; ++i) s[i * 7] = 0.0;
    EXPECT_TRUE(extract_phase(s));
    s[99] = 0.0;
    EXPECT_FALSE(extract_phase(s));
    EXPECT_FALSE(extract_phase(std::vector<cdouble>(20, cdouble{})));
}

TEST(SecondDerivativeFilter, CoefficientsAnnihilateConstantsAndLinears)
{
    double sum = 0.0, moment = 0.0, second = 0.0;
    for (int k = -3; k <= 3; ++k) {
        const double c = kSecondDerivativeTaps[static_cast<std::size_t>(k + 3)];
        sum += c;
        moment += k * c;
        second += k * k * c;
    }
    EXPECT_EQ(sum, 0.0);
    EXPECT_EQ(moment, 0.0);
    EXPECT_EQ(second, 32.0); // 2 * 16: a quadratic t^2 maps to 2
}

TEST(SecondDerivativeFilter, ResponseAtNyquistStaysBelowIdealDifferentiator)
{
    // H(w) = sum c_k e^{-jwk} / 16 (h = 1); ideal second derivative has |H| = w^2
    std::complex<double> h{};
    for (int k = -3; k <= 3; ++k)
        h += kSecondDerivativeTaps[static_cast<std::size_t>(k + 3)] * std::polar(1.0, -kPi * k) / 16.0;
    EXPECT_TRUE(std::isfinite(std::abs(h)));
    EXPECT_LT(std::abs(h), kPi * kPi);
}

TEST(AmplifyMicromotion, ConstantAndLinearGiveZero)
{
    const Series c(30, 3.5);
    for (double v : amplify_micromotion(c, 0.005)) EXPECT_EQ(v, 0.0);
    Series lin(30);
    for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 5.0 * (i * 0.005);
    for (double v : amplify_micromotion(lin, 0.005)) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(AmplifyMicromotion, QuadraticGivesTwoIncludingEdges)
{
    const double h = 0.005;
    Series s(50);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i * h) * (i * h);
    const auto out = amplify_micromotion(s, h);
    ASSERT_EQ(out.size(), s.size());
    for (double v : out) EXPECT_NEAR(v, 2.0, 2e-9);
}

TEST(AmplifyMicromotion, RejectsShortSeries)
{
    EXPECT_THROW(amplify_micromotion(Series(6, 0.0), 0.005), InvalidArgument);
    EXPECT_THROW(amplify_micromotion(Series(10, 0.0), 0.0), InvalidArgument);
}

TEST(ExtractMotion, SkipsDeadVoxelsAndKeepsLengths)
{
    BeamformedVoxelSeries bvs;
    bvs.grid.counts = {1, 2, 1};
    bvs.n_frames = 20;
    bvs.data.assign(40, cdouble{});
    for (std::size_t f = 0; f < 20; ++f) bvs.voxel(1)[f] = std::polar(1.0, 0.01 * f * f);
    const auto sig = extract_motion(bvs);
    ASSERT_EQ(sig.size(), 1u);
    EXPECT_EQ(sig[0].location, bvs.grid.center(1));
    EXPECT_EQ(sig[0].phase.size(), 20u);
    EXPECT_EQ(sig[0].acceleration.size(), 20u);
    EXPECT_DOUBLE_EQ(sig[0].power, 1.0);
}

TEST(ExtractMotion, AmplificationFavoursHeartbeatOverBreathing)
{
    // one scatterer near the heart, breathing on; phase beamformed at its own position
    const double duration = 20.0;
    const auto ecg = synth_ecg(duration, HeartRateProfile::constant(72.0), 5);
    TorsoPhantom ph;
    ph.scatterers = {{{0.02, -0.03, 0.45}, 1.0}};
    const BreathingParams breathing;
    const auto mp = ecg_to_surface_motion(ecg, ph, breathing);
    const ChirpConfig cfg;
    const auto cube = render_frames(mp, ph, cfg, default_channel_geometry(cfg), 20.0, 5);
    VoxelGrid one;
    one.counts = {1, 1, 1};
    one.lo = ph.scatterers[0].position - Vec3{1e-3, 1e-3, 1e-3};
    one.hi = ph.scatterers[0].position + Vec3{1e-3, 1e-3, 1e-3};
    const auto sig = extract_motion(beamform(cube, one));
    ASSERT_EQ(sig.size(), 1u);
    const double fs = 200.0;
    const double phase_breath = oracle::band_power(sig[0].phase, fs, 0.2, 0.34);
    const double phase_heart = oracle::band_power(sig[0].phase, fs, 0.8, 2.0);
    const double acc_breath = oracle::band_power(sig[0].acceleration, fs, 0.2, 0.34);
    const double acc_heart = oracle::band_power(sig[0].acceleration, fs, 0.8, 2.0);
    EXPECT_GT(phase_breath, phase_heart);
    // a second derivative weights power by w^4: (1.2 / 0.25)^4 is about 530
    EXPECT_GT((acc_heart / acc_breath) / (phase_heart / phase_breath), 100.0);
}

TEST(ExtractMotion, PhaseTracksImposedDisplacement)
{
    TorsoPhantom ph;
    ph.scatterers = {{{0.0, 0.05, 0.45}, 1.0}};
    MotionProfile mp;
    const std::size_t n = 400;
    mp.breathing.assign(n, 0.0);
    mp.cardiac.assign(1, Series(n));
    mp.cardiac_gain = {0.3e-3};
    for (std::size_t f = 0; f < n; ++f) mp.cardiac[0][f] = 0.3e-3 * std::sin(kTwoPi * 1.1 * f / 200.0);
    const ChirpConfig cfg;
    const auto cube = render_frames(mp, ph, cfg, default_channel_geometry(cfg), std::nullopt, 1);
    VoxelGrid one;
    one.counts = {1, 1, 1};
    one.lo = ph.scatterers[0].position - Vec3{1e-3, 1e-3, 1e-3};
    one.hi = ph.scatterers[0].position + Vec3{1e-3, 1e-3, 1e-3};
    const auto sig = extract_motion(beamform(cube, one));
    ASSERT_EQ(sig.size(), 1u);
    EXPECT_GT(stats::pearson(sig[0].phase, mp.cardiac[0]), 0.99);
}
