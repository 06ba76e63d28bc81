#pragma once

// Constrained, power-weighted K-means over (motion series, location) pairs
// and emission of the fixed-size cardiac measurement set.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "cardiowave/common.hpp"
#include "cardiowave/micromotion.hpp"

namespace cardiowave {

struct ClusterOptions {
    std::size_t k = 50;
    double rho_s = 1.0;
    double rho_l = 1.0;
    std::size_t max_iterations = 100;
    bool standardize = true;      // z-score each series and divide by sqrt(length)
    double location_scale = 1.0;  // locations are divided by this (crop-box diagonal in the pipeline)
    std::uint64_t seed = 1;
};

struct ClusterModel {
    std::size_t k = 0;
    double rho_s = 1.0;
    double rho_l = 1.0;
    std::vector<std::size_t> assignment;  // cluster of each input signal
    std::vector<Series> centroids;        // in clustering feature space
    std::vector<Vec3> centroid_locations; // metres
    std::vector<double> cluster_power;    // sum of member powers
    std::vector<std::size_t> members;     // member count per cluster
    std::vector<double> objective;        // J after initial assignment, then after every update
    std::size_t iterations = 0;
    bool converged = false;
    double series_scale = 1.0;            // multiply centroids by this to leave feature space
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        acc += d * d;
    }
    return acc;
}

inline double sq_dist(Vec3 a, Vec3 b)
{
    const Vec3 d = a - b;
    return d.dot(d);
}


} // namespace detail

/// J = sum_i p_i (rho_s ||s_i - mu_k(i)||^2 + rho_l ||l_i - l_k(i)||^2)
inline double cluster_objective(std::span<const Series> series, std::span<const Vec3> locations,
                                std::span<const double> power, std::span<const std::size_t> assignment,
                                std::span<const Series> centroids, std::span<const Vec3> centroid_locations,
                                double rho_s, double rho_l)
{
    double j = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t k = assignment[i];
        j += power[i] * (rho_s * detail::sq_dist(series[i], centroids[k]) +
                         rho_l * detail::sq_dist(locations[i], centroid_locations[k]));
    }
    return j;
}

/// EM for the power-weighted objective on prepared features. When
/// `initial_assignment` is given the first centroids are the weighted means of
/// that partition; otherwise seeded farthest-point sampling picks them.
inline ClusterModel cluster_features(std::span<const Series> series, std::span<const Vec3> locations,
                                     std::span<const double> power, const ClusterOptions& opt,
                                     std::optional<std::span<const std::size_t>> initial_assignment = std::nullopt)
{
    const std::size_t m = series.size();
    require(opt.k > 0, "cluster: K must be positive");
    require(m >= opt.k, "cluster: fewer signals than K");
    require(locations.size() == m && power.size() == m, "cluster: input sizes disagree");
    const std::size_t len = series.front().size();
    for (const auto& s : series) require(s.size() == len, "cluster: series lengths differ");
    for (double p : power) require(p >= 0 && std::isfinite(p), "cluster: power must be finite and >= 0");

    const std::size_t K = opt.k;
    double total_power = 0.0;
    for (double p : power) total_power += p;
    // all-zero power degenerates to uniform weights
    std::vector<double> w(power.begin(), power.end());
    if (total_power <= 0) std::fill(w.begin(), w.end(), 1.0);

    ClusterModel model;
    model.k = K;
    model.rho_s = opt.rho_s;
    model.rho_l = opt.rho_l;
    model.centroids.assign(K, Series(len, 0.0));
    model.centroid_locations.assign(K, Vec3{});
    model.assignment.assign(m, 0);

    auto dist = [&](std::size_t i, std::size_t k) {
        return opt.rho_s * detail::sq_dist(series[i], model.centroids[k]) +
               opt.rho_l * detail::sq_dist(locations[i], model.centroid_locations[k]);
    };

    auto update = [&]() {
        for (std::size_t k = 0; k < K; ++k) {
            double wsum = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                if (model.assignment[i] == k) wsum += w[i];
            if (wsum <= 0) continue; // empty: keep previous centroid
            Series mu(len, 0.0);
            Vec3 loc{};
            for (std::size_t i = 0; i < m; ++i) {
                if (model.assignment[i] != k) continue;
                const double a = w[i] / wsum;
                for (std::size_t t = 0; t < len; ++t) mu[t] += a * series[i][t];
                loc = loc + a * locations[i];
            }
            model.centroids[k] = std::move(mu);
            model.centroid_locations[k] = loc;
        }
    };

    auto objective = [&]() {
        return cluster_objective(series, locations, w, model.assignment, model.centroids, model.centroid_locations,
                                 opt.rho_s, opt.rho_l);
    };

    bool have_assignment = false;
    if (initial_assignment) {
        require(initial_assignment->size() == m, "cluster: initial assignment has the wrong size");
        for (std::size_t i = 0; i < m; ++i) {
            require((*initial_assignment)[i] < K, "cluster: initial assignment out of range");
            model.assignment[i] = (*initial_assignment)[i];
        }
        update();
        have_assignment = true;
    } else {
        // farthest-point sampling on the joint distance
        std::mt19937_64 rng(mix_seed(opt.seed, 0xC1));
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        std::vector<std::size_t> chosen{pick(rng)};
        std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
        auto joint = [&](std::size_t a, std::size_t b) {
            return opt.rho_s * detail::sq_dist(series[a], series[b]) +
                   opt.rho_l * detail::sq_dist(locations[a], locations[b]);
        };
        while (chosen.size() < K) {
            const std::size_t last = chosen.back();
            std::size_t arg = 0;
            double far = -1.0;
            for (std::size_t i = 0; i < m; ++i) {
                nearest[i] = std::min(nearest[i], joint(i, last));
                if (nearest[i] > far) {
                    far = nearest[i];
                    arg = i;
                }
            }
            chosen.push_back(arg);
        }
        for (std::size_t k = 0; k < K; ++k) {
            model.centroids[k] = series[chosen[k]];
            model.centroid_locations[k] = locations[chosen[k]];
        }
    }

    for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
        // assignment: move only when another centroid is strictly closer; ties go to the lowest index
        bool changed = false;
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t best_k = have_assignment ? model.assignment[i] : 0;
            double best = dist(i, best_k);
            for (std::size_t k = 0; k < K; ++k) {
                const double d = dist(i, k);
                if (d < best || (d == best && k < best_k && !have_assignment)) {
                    best = d;
                    best_k = k;
                }
            }
            if (!have_assignment || best_k != model.assignment[i]) changed = true;
            model.assignment[i] = best_k;
        }
        if (model.objective.empty()) model.objective.push_back(objective());
        have_assignment = true;
        if (!changed && iter > 0) {
            model.converged = true;
            break;
        }
        update();
        model.objective.push_back(objective());
        model.iterations = iter + 1;
    }

    model.cluster_power.assign(K, 0.0);
    model.members.assign(K, 0);
    for (std::size_t i = 0; i < m; ++i) {
        model.cluster_power[model.assignment[i]] += power[i];
        ++model.members[model.assignment[i]];
    }
    return model;
}

/// Clusters motion signals (acceleration series) per the options. Series are
/// standardised to zero mean and unit variance and divided by sqrt(length);
/// locations are divided by location_scale. Centroid locations come back in metres.
inline ClusterModel cluster(std::span<const MotionSignal> signals, const ClusterOptions& opt)
{
    require(!signals.empty(), "cluster: no signals");
    require(signals.size() >= opt.k, "cluster: fewer signals than K");
    require(opt.location_scale > 0, "cluster: location_scale must be positive");
    const std::size_t len = signals.front().acceleration.size();
    std::vector<Series> series;
    std::vector<Vec3> locs;
    std::vector<double> power;
    const double root = std::sqrt(static_cast<double>(len));
    for (const auto& s : signals) {
        require(s.acceleration.size() == len, "cluster: series lengths differ");
        Series x = s.acceleration;
        if (opt.standardize) {
            const double mu = stats::mean(x);
            const double sd = std::sqrt(stats::variance(x));
            for (double& v : x) v = sd > 0 ? (v - mu) / (sd * root) : 0.0;
        }
        series.push_back(std::move(x));
        locs.push_back((1.0 / opt.location_scale) * s.location);
        power.push_back(s.power);
    }
    auto model = cluster_features(series, locs, power, opt);
    for (auto& l : model.centroid_locations) l = opt.location_scale * l;
    model.series_scale = opt.standardize ? root : 1.0;
    return model;
}

/// One entry of the cardiac measurement set.
struct ClusterEntry {
    Series motion;
    Vec3 location;
    double power = 0.0;
};

/// The fixed-size set of N centroid motion series with their locations.
struct CardiacMeasurementSet {
    std::uint32_t frame_rate = 200;
    std::uint32_t frames = 0;
    std::vector<ClusterEntry> entries;
};

/// Non-empty clusters ordered by descending aggregate power, then zero entries
/// at `fallback_location` until exactly n entries exist.
inline CardiacMeasurementSet emit_measurements(const ClusterModel& model, std::size_t n, Vec3 fallback_location,
                                               std::uint32_t frame_rate = 200)
{
    CardiacMeasurementSet out;
    out.frame_rate = frame_rate;
    const std::size_t len = model.centroids.empty() ? 0 : model.centroids.front().size();
    out.frames = static_cast<std::uint32_t>(len);
    for (std::size_t k = 0; k < model.k; ++k) {
        if (model.members.empty() || model.members[k] == 0) continue;
        ClusterEntry e;
        e.motion = model.centroids[k];
        for (double& v : e.motion) v *= model.series_scale;
        e.location = model.centroid_locations[k];
        e.power = model.cluster_power[k];
        out.entries.push_back(std::move(e));
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const ClusterEntry& a, const ClusterEntry& b) {
        if (a.power != b.power) return a.power > b.power;
        if (a.location.x != b.location.x) return a.location.x < b.location.x;
        if (a.location.y != b.location.y) return a.location.y < b.location.y;
        if (a.location.z != b.location.z) return a.location.z < b.location.z;
        return a.motion < b.motion;
    });
    if (out.entries.size() > n) out.entries.resize(n);
    while (out.entries.size() < n) out.entries.push_back({Series(len, 0.0), fallback_location, 0.0});
    return out;
}
} // namespace cardiowave
