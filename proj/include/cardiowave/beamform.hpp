#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "cardiowave/common.hpp"
#include "cardiowave/radar_sim.hpp"

namespace cardiowave {

/// Cartesian voxel grid in radar coordinates. Voxel centres sit at the middle
/// of equal cells, so they are strictly inside the bounds. Voxels are indexed
/// x-major: ((ix * ny) + iy) * nz + iz.
struct VoxelGrid {
    Vec3 lo{-0.4, -0.4, 0.35};
    Vec3 hi{0.4, 0.4, 0.6};
    std::array<std::uint32_t, 3> counts{9, 17, 9};

    [[nodiscard]] std::size_t size() const
    {
        return static_cast<std::size_t>(counts[0]) * counts[1] * counts[2];
    }

    [[nodiscard]] Vec3 step() const
    {
        return {(hi.x - lo.x) / counts[0], (hi.y - lo.y) / counts[1], (hi.z - lo.z) / counts[2]};
    }

    [[nodiscard]] std::size_t index(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const
    {
        return (static_cast<std::size_t>(ix) * counts[1] + iy) * counts[2] + iz;
    }

    [[nodiscard]] std::array<std::uint32_t, 3> coords(std::size_t v) const
    {
        const auto iz = static_cast<std::uint32_t>(v % counts[2]);
        const auto iy = static_cast<std::uint32_t>((v / counts[2]) % counts[1]);
        const auto ix = static_cast<std::uint32_t>(v / (static_cast<std::size_t>(counts[1]) * counts[2]));
        return {ix, iy, iz};
    }

    [[nodiscard]] Vec3 center(std::size_t v) const
    {
        const auto [ix, iy, iz] = coords(v);
        const Vec3 d = step();
        return {lo.x + (ix + 0.5) * d.x, lo.y + (iy + 0.5) * d.y, lo.z + (iz + 0.5) * d.z};
    }

    [[nodiscard]] Vec3 middle() const { return 0.5 * (lo + hi); }
    [[nodiscard]] double diagonal() const { return (hi - lo).norm(); }

    /// Voxel whose cell contains p (clamped to the grid).
    [[nodiscard]] std::size_t nearest(Vec3 p) const
    {
        const Vec3 d = step();
        auto cell = [](double v, double lo, double s, std::uint32_t n) {
            const long i = static_cast<long>(std::floor((v - lo) / s));
            return static_cast<std::uint32_t>(std::clamp(i, 0L, static_cast<long>(n) - 1));
        };
        return index(cell(p.x, lo.x, d.x, counts[0]), cell(p.y, lo.y, d.y, counts[1]), cell(p.z, lo.z, d.z, counts[2]));
    }

    /// Chebyshev distance in voxel units.
    [[nodiscard]] std::uint32_t voxel_distance(std::size_t a, std::size_t b) const
    {
        const auto ca = coords(a);
        const auto cb = coords(b);
        std::uint32_t m = 0;
        for (int k = 0; k < 3; ++k) m = std::max(m, ca[k] > cb[k] ? ca[k] - cb[k] : cb[k] - ca[k]);
        return m;
    }

    void validate() const
    {
        require(counts[0] > 0 && counts[1] > 0 && counts[2] > 0, "grid: empty voxel grid");
        require(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z, "grid: bounds must be increasing");
    }
};

/// Complex slow-time series per voxel, voxel-major.
struct BeamformedVoxelSeries {
    VoxelGrid grid;
    double frame_rate = 200.0;
    std::uint32_t n_frames = 0;
    std::vector<cdouble> data;

    [[nodiscard]] std::size_t n_voxels() const { return grid.size(); }
    [[nodiscard]] std::span<const cdouble> voxel(std::size_t v) const
    {
        return {data.data() + v * n_frames, n_frames};
    }
    [[nodiscard]] std::span<cdouble> voxel(std::size_t v) { return {data.data() + v * n_frames, n_frames}; }
};

/// Matched projection of every channel and fast-time sample onto each voxel:
///   S(v, f) = sum_n sum_t y[f, n, t] * conj(exp(j 2 pi (k r_vn / c * t + r_vn / lambda)))
/// where r_vn is the exact TX -> voxel -> RX path of channel n. The steering
/// matrix is built once per (grid, chirp, geometry); frames are then projected
/// in blocks with one GEMM each.
class Beamformer {
public:
    using CMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Beamformer(const VoxelGrid& grid, const ChirpConfig& cfg, const ChannelGeometry& geometry)
        : grid_(grid), cfg_(cfg), n_channels_(geometry.size())
    {
        grid.validate();
        cfg.validate();
        require(geometry.size() == cfg.n_channels(), "beamform: geometry/channel count mismatch");
        const std::size_t nv = grid.size();
        const std::size_t ns = cfg.n_samples;
        steering_.resize(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(n_channels_ * ns));
        const double lambda = cfg.wavelength();
        const double beat_per_m = cfg.slope / kSpeedOfLight;
        for (std::size_t v = 0; v < nv; ++v) {
            const Vec3 p = grid.center(v);
            for (std::size_t ch = 0; ch < n_channels_; ++ch) {
                const double r = round_trip(geometry[ch], p);
                const double carrier = std::fmod(r / lambda, 1.0);
                const double fb = beat_per_m * r;
                for (std::size_t s = 0; s < ns; ++s) {
                    const double cycles = std::fmod(fb * cfg.fast_time(static_cast<std::uint32_t>(s)), 1.0) + carrier;
                    steering_(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(ch * ns + s)) =
                        std::polar(1.0, -kTwoPi * cycles);
                }
            }
        }
    }

    [[nodiscard]] const VoxelGrid& grid() const { return grid_; }

    [[nodiscard]] BeamformedVoxelSeries operator()(const RadarFrameCube& cube, std::uint32_t block_frames = 256) const
    {
        cube.validate();
        require(cube.n_channels == n_channels_ && cube.n_samples == cfg_.n_samples,
                "beamform: cube layout differs from the beamformer's");
        const std::size_t nv = grid_.size();
        const std::size_t width = static_cast<std::size_t>(cube.n_channels) * cube.n_samples;

        BeamformedVoxelSeries out;
        out.grid = grid_;
        out.frame_rate = cube.config.frame_rate();
        out.n_frames = cube.n_frames;
        out.data.assign(nv * cube.n_frames, cdouble{});
        if (cube.n_frames == 0) return out;

        Eigen::Map<CMatrix> result(out.data.data(), static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(cube.n_frames));
        const std::uint32_t block = std::max<std::uint32_t>(1, block_frames);
        for (std::uint32_t f0 = 0; f0 < cube.n_frames; f0 += block) {
            const std::uint32_t nf = std::min(block, cube.n_frames - f0);
            Eigen::Map<const CMatrix> y(cube.data.data() + static_cast<std::size_t>(f0) * width, nf,
                                        static_cast<Eigen::Index>(width));
            result.middleCols(f0, nf).noalias() = steering_ * y.transpose();
        }
        return out;
    }

private:
    VoxelGrid grid_;
    ChirpConfig cfg_;
    std::size_t n_channels_;
    CMatrix steering_;
};

inline BeamformedVoxelSeries beamform(const RadarFrameCube& cube, const VoxelGrid& grid, std::uint32_t block_frames = 256)
{
    cube.validate();
    return Beamformer(grid, cube.config, cube.geometry)(cube, block_frames);
}

/// Mean |S|^2 per voxel, same ordering as the grid.
inline std::vector<double> voxel_power(const BeamformedVoxelSeries& series)
{
    require(series.n_frames > 0 && series.data.size() == series.n_voxels() * series.n_frames,
            "voxel_power: empty series");
    std::vector<double> p(series.n_voxels(), 0.0);
    for (std::size_t v = 0; v < p.size(); ++v) {
        double acc = 0.0;
        for (const auto& z : series.voxel(v)) acc += std::norm(z);
        p[v] = acc / series.n_frames;
    }
    return p;
}

inline std::size_t argmax(std::span<const double> x)
{
    return static_cast<std::size_t>(std::distance(x.begin(), std::max_element(x.begin(), x.end())));
}

} // namespace cardiowave
