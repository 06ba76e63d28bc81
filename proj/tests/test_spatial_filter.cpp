#include <gtest/gtest.h>

#include <random>

#include "cardiowave/spatial_filter.hpp"
#include "oracles.hpp"

using namespace cardiowave;

namespace {

struct Features {
    std::vector<Series> series;
    std::vector<Vec3> locations;
    std::vector<double> power;

    std::vector<double> flat_locations() const
    {
        std::vector<double> f;
        for (auto l : locations) f.insert(f.end(), {l.x, l.y, l.z});
        return f;
    }
};

Features random_features(std::size_t m, std::size_t len, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.1, 2.0);
    Features f;
    for (std::size_t i = 0; i < m; ++i) {
        Series s(len);
        for (double& v : s) v = g(rng);
        f.series.push_back(std::move(s));
        f.locations.push_back({g(rng), g(rng), g(rng)});
        f.power.push_back(u(rng));
    }
    return f;
}

MotionSignal motion(Series acc, Vec3 loc, double power)
{
    MotionSignal s;
    s.acceleration = std::move(acc);
    s.phase = Series(s.acceleration.size(), 0.0);
    s.location = loc;
    s.power = power;
    return s;
}

} // namespace

TEST(Cluster, RecoversSeparatedGroupsWithZeroObjective)
{
    // three exact prototypes at three places, four copies each
    Features f;
    const std::vector<Series> proto{{1, 0, 0, 0}, {0, 2, 0, -1}, {0, 0, 3, 1}};
    const std::vector<Vec3> where{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    for (std::size_t c = 0; c < 3; ++c)
        for (int r = 0; r < 4; ++r) {
            f.series.push_back(proto[c]);
            f.locations.push_back(where[c]);
            f.power.push_back(1.0 + r);
        }
    ClusterOptions opt;
    opt.k = 3;
    const auto model = cluster_features(f.series, f.locations, f.power, opt);
    EXPECT_TRUE(model.converged);
    EXPECT_EQ(model.objective.back(), 0.0);
    for (std::size_t i = 0; i < f.series.size(); ++i) {
        EXPECT_EQ(model.assignment[i], model.assignment[4 * (i / 4)]);
        EXPECT_EQ(model.centroids[model.assignment[i]], f.series[i]);
    }
    EXPECT_NE(model.assignment[0], model.assignment[4]);
    EXPECT_NE(model.assignment[4], model.assignment[8]);
    EXPECT_NE(model.assignment[0], model.assignment[8]);
}

TEST(Cluster, TwoIdenticalSignalsInOneCluster)
{
    const Series x{0.5, -1.0, 2.0, 0.0};
    const std::vector<Series> s{x, x};
    const std::vector<Vec3> l{{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}};
    const std::vector<double> p{1.0, 3.0};
    ClusterOptions opt;
    opt.k = 1;
    const auto model = cluster_features(s, l, p, opt);
    EXPECT_EQ(model.centroids[0], x);
    EXPECT_EQ(model.objective.back(), 0.0);
    EXPECT_EQ(model.members[0], 2u);
    EXPECT_EQ(model.cluster_power[0], 4.0);
}

TEST(Cluster, SingleClusterCentroidIsThePowerWeightedMean)
{
    const std::vector<Series> s{{0.0, 0.0}, {4.0, 8.0}};
    const std::vector<Vec3> l{{0, 0, 0}, {1, 0, 0}};
    const std::vector<double> p{3.0, 1.0};
    ClusterOptions opt;
    opt.k = 1;
    const auto model = cluster_features(s, l, p, opt);
    EXPECT_DOUBLE_EQ(model.centroids[0][0], 1.0);
    EXPECT_DOUBLE_EQ(model.centroids[0][1], 2.0);
    EXPECT_DOUBLE_EQ(model.centroid_locations[0].x, 0.25);
}

TEST(Cluster, RaisingOnePowerPullsItsCentroidCloser)
{
    const auto f = random_features(12, 6, 3);
    ClusterOptions opt;
    opt.k = 1;
    const auto before = cluster_features(f.series, f.locations, f.power, opt);
    auto heavier = f.power;
    heavier[5] *= 10.0;
    const auto after = cluster_features(f.series, f.locations, heavier, opt);
    auto gap = [&](const ClusterModel& m) {
        return detail::sq_dist(f.series[5], m.centroids[0]) + detail::sq_dist(f.locations[5], m.centroid_locations[0]);
    };
    EXPECT_LT(gap(after), gap(before));
}

TEST(Cluster, ObjectiveNeverIncreases)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto f = random_features(40, 10, 100 + seed);
        ClusterOptions opt;
        opt.k = 5;
        opt.seed = seed;
        opt.rho_l = 0.5;
        const auto model = cluster_features(f.series, f.locations, f.power, opt);
        ASSERT_GE(model.objective.size(), 2u);
        for (std::size_t i = 1; i < model.objective.size(); ++i)
            EXPECT_LE(model.objective[i], model.objective[i - 1]) << "seed " << seed << " step " << i;
    }
}

TEST(Cluster, BestRestartMatchesExhaustivePartitionSearch)
{
    for (std::size_t m = 3; m <= 8; ++m) {
        const auto f = random_features(m, 4, 50 + m);
        const auto flat = f.flat_locations();
        const std::size_t parts = std::size_t{1} << m;
        double exhaustive = std::numeric_limits<double>::infinity();
        double restarts = std::numeric_limits<double>::infinity();
        ClusterOptions opt;
        opt.k = 2;
        opt.rho_l = 0.7;
        for (std::size_t code = 0; code < parts; ++code) {
            std::vector<std::size_t> part(m);
            for (std::size_t i = 0; i < m; ++i) part[i] = (code >> i) & 1u;
            exhaustive = std::min(exhaustive, oracle::partition_objective(f.series, flat, f.power, part, 2, 1.0, 0.7));
            const auto model =
                cluster_features(f.series, f.locations, f.power, opt, std::span<const std::size_t>(part));
            restarts = std::min(restarts, model.objective.back());
        }
        EXPECT_NEAR(restarts, exhaustive, 1e-9 * std::max(1.0, exhaustive)) << "m=" << m;
    }
}

TEST(Cluster, FixedSeedIsDeterministic)
{
    const auto f = random_features(30, 8, 7);
    ClusterOptions opt;
    opt.k = 4;
    opt.seed = 42;
    const auto a = cluster_features(f.series, f.locations, f.power, opt);
    const auto b = cluster_features(f.series, f.locations, f.power, opt);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(Cluster, RejectsBadInput)
{
    const auto f = random_features(3, 4, 8);
    ClusterOptions opt;
    opt.k = 4;
    EXPECT_THROW(cluster_features(f.series, f.locations, f.power, opt), InvalidArgument);
    opt.k = 2;
    auto neg = f.power;
    neg[0] = -1.0;
    EXPECT_THROW(cluster_features(f.series, f.locations, neg, opt), InvalidArgument);
}

TEST(Cluster, StandardisesSeriesAndRestoresScale)
{
    std::vector<MotionSignal> sig;
    sig.push_back(motion({1, 2, 3, 4}, {0, 0, 0.4}, 1.0));
    sig.push_back(motion({10, 20, 30, 40}, {0, 0, 0.4}, 1.0));
    ClusterOptions opt;
    opt.k = 1;
    opt.location_scale = 2.0;
    const auto model = cluster(sig, opt);
    // identical after z-scoring, so the objective is zero and the centroid has unit norm
    EXPECT_NEAR(model.objective.back(), 0.0, 1e-24);
    double norm = 0.0;
    for (double v : model.centroids[0]) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_EQ(model.series_scale, 2.0);
    EXPECT_NEAR(model.centroid_locations[0].z, 0.4, 1e-15);
}

TEST(EmitMeasurements, OrderedByPowerAndPaddedToN)
{
    const auto f = random_features(10, 5, 9);
    ClusterOptions opt;
    opt.k = 3;
    const auto model = cluster_features(f.series, f.locations, f.power, opt);
    const Vec3 fallback{0.0, 0.0, 0.5};
    const auto set = emit_measurements(model, 5, fallback);
    ASSERT_EQ(set.entries.size(), 5u);
    EXPECT_EQ(set.frames, 5u);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_GE(set.entries[i - 1].power, set.entries[i].power);
    for (std::size_t i = 3; i < 5; ++i) {
        EXPECT_EQ(set.entries[i].power, 0.0);
        EXPECT_EQ(set.entries[i].location, fallback);
        for (double v : set.entries[i].motion) EXPECT_EQ(v, 0.0);
    }
    EXPECT_EQ(emit_measurements(model, 2, fallback).entries.size(), 2u);
}

TEST(EmitMeasurements, KEqualToMPassesSignalsThrough)
{
    const auto f = random_features(4, 6, 10);
    ClusterOptions opt;
    opt.k = 4;
    const auto model = cluster_features(f.series, f.locations, f.power, opt);
    EXPECT_EQ(model.objective.back(), 0.0);
    const auto set = emit_measurements(model, 4, {});
    for (const auto& e : set.entries) {
        bool found = false;
        for (std::size_t i = 0; i < 4; ++i) found = found || (e.motion == f.series[i] && e.power == f.power[i]);
        EXPECT_TRUE(found);
    }
}

TEST(EmitMeasurements, InvariantToInputOrder)
{
    std::vector<MotionSignal> sig;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int i = 0; i < 12; ++i) {
        Series x(20);
        for (double& v : x) v = g(rng) + (i % 3) * 3.0 * std::sin(0.5 * (&v - x.data()));
        sig.push_back(motion(std::move(x), {0.01 * i, 0.0, 0.4}, 1.0 + i));
    }
    ClusterOptions opt;
    opt.k = 12;
    const auto a = emit_measurements(cluster(sig, opt), 12, {});
    std::reverse(sig.begin(), sig.end());
    const auto b = emit_measurements(cluster(sig, opt), 12, {});
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        EXPECT_EQ(a.entries[i].motion, b.entries[i].motion);
        EXPECT_EQ(a.entries[i].location, b.entries[i].location);
    }
}
