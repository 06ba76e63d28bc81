#pragma once

// Synthetic data generation: ground-truth ECG, a torso phantom whose surface
// moves under breathing and conducted cardiac pulses, and raw FMCW IF cubes.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cardiowave/common.hpp"
#include "cardiowave/ecg.hpp"

namespace cardiowave {

/// Chirp and frame timing. Defaults reproduce the AWR1843 setup used for sensing.
struct ChirpConfig {
    double start_freq = 77e9;    // Hz
    double slope = 65e12;        // Hz/s (65 MHz/us)
    double idle_time = 10e-6;    // s
    double ramp_end_time = 60e-6; // s
    std::uint32_t n_samples = 256;
    double adc_rate = 5e6;       // Hz
    double frame_period = 5e-3;  // s
    std::uint32_t n_tx = 3;
    std::uint32_t n_rx = 4;

    [[nodiscard]] double sampling_time() const { return n_samples / adc_rate; }
    [[nodiscard]] double bandwidth() const { return slope * sampling_time(); }
    [[nodiscard]] double wavelength() const { return kSpeedOfLight / start_freq; }
    [[nodiscard]] std::uint32_t n_channels() const { return n_tx * n_rx; }
    [[nodiscard]] double frame_rate() const { return 1.0 / frame_period; }

    /// Fast-time instant of ADC sample `s`, measured from the centre of the
    /// sampling window. The simulator and the beamformer share this axis.
    [[nodiscard]] double fast_time(std::uint32_t s) const
    {
        return (static_cast<double>(s) - 0.5 * (static_cast<double>(n_samples) - 1.0)) / adc_rate;
    }

    void validate() const
    {
        require(std::isfinite(start_freq) && start_freq > 0, "chirp: start_freq must be positive");
        require(std::isfinite(slope) && slope > 0, "chirp: slope must be positive");
        require(n_samples > 0 && adc_rate > 0, "chirp: need samples and a positive ADC rate");
        require(sampling_time() <= ramp_end_time * (1.0 + 1e-12),
                "chirp: n_samples / adc_rate exceeds ramp end time");
        require(frame_period > 0, "chirp: frame_period must be positive");
        require(n_tx > 0 && n_rx > 0, "chirp: need at least one TX and one RX");
    }
};

/// TX and RX phase-centre positions of one virtual channel.
struct AntennaPair {
    Vec3 tx;
    Vec3 rx;
};

using ChannelGeometry = std::vector<AntennaPair>;

/// Round-trip path length TX -> point -> RX.
inline double round_trip(const AntennaPair& ch, Vec3 p) { return distance(ch.tx, p) + distance(p, ch.rx); }

/// AWR1843-style array: RX at half-wavelength pitch along y, TX1/TX3 two
/// wavelengths apart along y, TX2 raised half a wavelength along x. All
/// antennas lie in z = 0 and the layout is centred on the origin.
/// Channels are ordered TX-major.
inline ChannelGeometry default_channel_geometry(const ChirpConfig& cfg)
{
    const double half = 0.5 * cfg.wavelength();
    std::vector<Vec3> tx;
    std::vector<Vec3> rx;
    for (std::uint32_t r = 0; r < cfg.n_rx; ++r) rx.push_back({0.0, r * half, 0.0});
    for (std::uint32_t t = 0; t < cfg.n_tx; ++t) {
        // pattern repeats every 3 transmitters: y = 0, n_rx/2, n_rx half-wavelengths; middle one raised
        const std::uint32_t block = t / 3;
        const std::uint32_t k = t % 3;
        const double y = (2.0 * block + 0.5 * k) * cfg.n_rx * half;
        const double x = (k == 1) ? half : 0.0;
        tx.push_back({x, y, 0.0});
    }
    Vec3 centre{};
    for (auto p : tx) centre = centre + p;
    for (auto p : rx) centre = centre + p;
    centre = (1.0 / static_cast<double>(tx.size() + rx.size())) * centre;

    ChannelGeometry g;
    g.reserve(tx.size() * rx.size());
    for (auto t : tx)
        for (auto r : rx) g.push_back({t - centre, r - centre});
    return g;
}

struct Scatterer {
    Vec3 position;
    double reflectivity = 1.0;
};

/// Point-scatterer torso surface plus the parameters of the damped surface
/// wave that carries cardiac motion outward from the heart.
struct TorsoPhantom {
    std::vector<Scatterer> scatterers;
    Vec3 heart_center{0.02, -0.03, 0.50};
    double conduction_speed = 5.0; // m/s
    double conduction_decay = 2.5; // 1/m

    void validate() const
    {
        require(!scatterers.empty(), "phantom: no scatterers");
        for (const auto& s : scatterers)
            require(s.reflectivity > 0 && std::isfinite(s.reflectivity), "phantom: reflectivity must be > 0");
        require(conduction_speed > 0, "phantom: conduction_speed must be positive");
        require(conduction_decay >= 0, "phantom: conduction_decay must be non-negative");
    }
};

/// rows x cols scatterers on a plane of the given extent centred at (0, 0, z).
inline TorsoPhantom default_phantom(std::uint32_t rows = 8, std::uint32_t cols = 8, double height = 0.3,
                                    double width = 0.4, double z = 0.45)
{
    TorsoPhantom ph;
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            const double x = rows > 1 ? -0.5 * height + height * i / (rows - 1.0) : 0.0;
            const double y = cols > 1 ? -0.5 * width + width * j / (cols - 1.0) : 0.0;
            ph.scatterers.push_back({{x, y, z}, 1.0});
        }
    }
    return ph;
}

/// Piecewise-linear heart rate in BPM, knots every `step` seconds from t = 0.
struct HeartRateProfile {
    std::vector<double> bpm{60.0};
    double step = 1.0;

    static HeartRateProfile constant(double rate) { return {{rate}, 1.0}; }
    static HeartRateProfile ramp(double from, double to, double duration)
    {
        return {{from, to}, duration};
    }

    [[nodiscard]] double at(double t) const
    {
        if (bpm.size() == 1 || t <= 0) return bpm.front();
        const double pos = t / step;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= bpm.size()) return bpm.back();
        const double f = pos - static_cast<double>(i);
        return bpm[i] + f * (bpm[i + 1] - bpm[i]);
    }
};

struct EcgSynthOptions {
    std::uint32_t sample_rate = 200;
    double period_jitter = 0.02; // relative std-dev of each R-R interval; 0 disables
};

namespace detail {

struct Wave {
    double offset;    // s relative to R; scaled by sqrt(RR) for P and T
    double amplitude; // mV
    double width;     // s (Gaussian sigma)
    bool scales_with_rate;
};

inline constexpr Wave kPqrst[5] = {
    {-0.20, 0.15, 0.025, true},  // P
    {-0.035, -0.15, 0.010, false}, // Q
    {0.0, 1.00, 0.010, false},   // R
    {0.035, -0.25, 0.010, false}, // S
    {0.28, 0.30, 0.040, true},   // T
};

} // namespace detail

/// Sum-of-Gaussians PQRST generator. The first R peak falls half an R-R
/// interval after t = 0; each following interval is 60/bpm(t) seconds with
/// optional multiplicative Gaussian jitter. Annotations hold the centre sample
/// of each wave (kNoIndex if it falls outside the trace).
inline EcgTrace synth_ecg(double duration, const HeartRateProfile& hr, std::uint64_t seed,
                          const EcgSynthOptions& opt = {})
{
    require(duration > 0 && std::isfinite(duration), "synth_ecg: duration must be positive");
    require(!hr.bpm.empty() && hr.step > 0, "synth_ecg: empty heart-rate profile");
    for (double b : hr.bpm)
        require(b >= 50.0 && b <= 125.0, "synth_ecg: heart rate outside 50-125 BPM");
    require(opt.period_jitter >= 0 && opt.period_jitter < 0.2, "synth_ecg: jitter must be in [0, 0.2)");

    const double fs = opt.sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(duration * fs));
    EcgTrace ecg;
    ecg.sample_rate = opt.sample_rate;
    ecg.samples.assign(n, 0.0);

    std::mt19937_64 rng(mix_seed(seed, 0xECC));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::pair<double, double>> beats; // (R time, R-R used for scaling)
    double rr = 60.0 / hr.at(0.0);
    double t_r = 0.5 * rr;
    while (t_r < duration) {
        rr = 60.0 / hr.at(t_r);
        beats.emplace_back(t_r, rr);
        double next = rr;
        if (opt.period_jitter > 0) next *= 1.0 + opt.period_jitter * std::clamp(gauss(rng), -3.0, 3.0);
        t_r += next;
    }

    for (const auto& [tr, period] : beats) {
        const double scale = std::sqrt(period);
        BeatAnnotation ann;
        std::uint32_t* slots[5] = {&ann.p, &ann.q, &ann.r, &ann.s, &ann.t};
        for (int w = 0; w < 5; ++w) {
            const auto& wave = detail::kPqrst[w];
            const double centre = tr + (wave.scales_with_rate ? wave.offset * scale : wave.offset);
            const double width = wave.scales_with_rate ? wave.width * scale : wave.width;
            const long idx = std::lround(centre * fs);
            if (idx >= 0 && static_cast<std::size_t>(idx) < n) *slots[w] = static_cast<std::uint32_t>(idx);
            const long lo = std::max(0L, static_cast<long>(std::floor((centre - 5 * width) * fs)));
            const long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(std::ceil((centre + 5 * width) * fs)));
            for (long i = lo; i <= hi; ++i) {
                const double dt = i / fs - centre;
                ecg.samples[static_cast<std::size_t>(i)] += wave.amplitude * std::exp(-0.5 * dt * dt / (width * width));
            }
        }
        if (ann.r != kNoIndex) ecg.beats.push_back(ann);
    }

    double peak = 0.0;
    for (double v : ecg.samples) peak = std::max(peak, std::abs(v));
    if (peak > 1.0)
        for (double& v : ecg.samples) v /= peak;
    return ecg;
}

/// Biphasic per-beat surface pulse: a positive Gaussian lobe followed by a
/// weaker, wider negative lobe, normalised to unit peak.
struct CardiacKernel {
    double amplitude = 0.5e-3;          // m, peak displacement at the heart centre
    double electromechanical_delay = 0.05; // s after R
    double main_width = 0.03;           // s
    double rebound_delay = 0.08;        // s after main lobe
    double rebound_width = 0.05;        // s
    double rebound_ratio = 0.6;

    [[nodiscard]] double shape(double t) const
    {
        const double a = std::exp(-0.5 * t * t / (main_width * main_width));
        const double u = t - rebound_delay;
        const double b = std::exp(-0.5 * u * u / (rebound_width * rebound_width));
        return a - rebound_ratio * b;
    }

    [[nodiscard]] double peak() const
    {
        double best = 0.0;
        for (double t = -0.2; t <= 0.4; t += 1e-4) best = std::max(best, std::abs(shape(t)));
        return best;
    }

    [[nodiscard]] double support() const { return 5.0 * std::max(main_width, rebound_width) + rebound_delay; }
};

struct BreathingParams {
    bool enabled = true;
    double amplitude = 8e-3; // m, peak-to-peak chest excursion
    double rate = 0.25;      // Hz
    double phase = 0.0;      // rad

    void validate() const
    {
        if (!enabled) return;
        require(amplitude >= 4e-3 && amplitude <= 12e-3, "breathing: amplitude outside 4-12 mm");
        require(rate >= 0.2 && rate <= 0.34, "breathing: rate outside 0.2-0.34 Hz");
    }
};

/// Radial displacement of every scatterer, one sample per radar frame.
struct MotionProfile {
    double frame_rate = 200.0;
    Series breathing;               // shared by all scatterers
    std::vector<Series> cardiac;    // one per scatterer
    std::vector<double> cardiac_gain; // peak cardiac displacement per scatterer, m

    [[nodiscard]] std::size_t n_frames() const { return breathing.size(); }
    [[nodiscard]] std::size_t n_scatterers() const { return cardiac.size(); }
    [[nodiscard]] double displacement(std::size_t scatterer, std::size_t frame) const
    {
        return breathing[frame] + cardiac[scatterer][frame];
    }
};

/// Damped surface-wave model: each scatterer sees the per-beat kernel delayed
/// by d / conduction_speed and scaled by exp(-conduction_decay * d), where d is
/// its distance to the heart centre. Breathing is a shared quasi-sinusoid with
/// a weak second harmonic.
inline MotionProfile ecg_to_surface_motion(const EcgTrace& ecg, const TorsoPhantom& phantom,
                                           const BreathingParams& breathing, const CardiacKernel& kernel = {})
{
    phantom.validate();
    breathing.validate();
    require(!ecg.beats.empty(), "ecg_to_surface_motion: ECG has no beats");
    require(kernel.amplitude >= 0.2e-3 && kernel.amplitude <= 0.5e-3,
            "ecg_to_surface_motion: cardiac amplitude outside 0.2-0.5 mm");

    const double fs = ecg.sample_rate;
    const std::size_t n = ecg.samples.size();
    MotionProfile mp;
    mp.frame_rate = fs;
    mp.breathing.assign(n, 0.0);
    if (breathing.enabled) {
        const double half = 0.5 * breathing.amplitude / 1.1;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = kTwoPi * breathing.rate * (i / fs) + breathing.phase;
            mp.breathing[i] = half * (std::sin(w) + 0.1 * std::sin(2.0 * w + 0.7));
        }
    }

    const double norm = 1.0 / kernel.peak();
    const double support = kernel.support();
    for (const auto& sc : phantom.scatterers) {
        const double d = distance(sc.position, phantom.heart_center);
        const double delay = kernel.electromechanical_delay + d / phantom.conduction_speed;
        const double gain = kernel.amplitude * std::exp(-phantom.conduction_decay * d);
        Series c(n, 0.0);
        for (const auto& beat : ecg.beats) {
            const double onset = beat.r / fs + delay;
            const long lo = std::max(0L, static_cast<long>(std::floor((onset - support) * fs)));
            const long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(std::ceil((onset + support) * fs)));
            for (long i = lo; i <= hi; ++i)
                c[static_cast<std::size_t>(i)] += gain * norm * kernel.shape(i / fs - onset);
        }
        mp.cardiac.push_back(std::move(c));
        mp.cardiac_gain.push_back(gain);
    }
    return mp;
}

/// Raw IF samples, frame-major, channel-major, sample-minor.
struct RadarFrameCube {
    std::uint32_t n_frames = 0;
    std::uint32_t n_channels = 0;
    std::uint32_t n_samples = 0;
    std::vector<cdouble> data;
    ChirpConfig config;
    ChannelGeometry geometry;

    RadarFrameCube() = default;
    RadarFrameCube(std::uint32_t frames, const ChirpConfig& cfg, ChannelGeometry geom)
        : n_frames(frames), n_channels(cfg.n_channels()), n_samples(cfg.n_samples),
          data(static_cast<std::size_t>(frames) * cfg.n_channels() * cfg.n_samples), config(cfg),
          geometry(std::move(geom))
    {
    }

    [[nodiscard]] std::size_t index(std::size_t f, std::size_t ch, std::size_t s) const
    {
        return (f * n_channels + ch) * n_samples + s;
    }
    cdouble& at(std::size_t f, std::size_t ch, std::size_t s) { return data[index(f, ch, s)]; }
    [[nodiscard]] const cdouble& at(std::size_t f, std::size_t ch, std::size_t s) const { return data[index(f, ch, s)]; }

    [[nodiscard]] std::span<const cdouble> frame(std::size_t f) const
    {
        return {data.data() + f * n_channels * n_samples, static_cast<std::size_t>(n_channels) * n_samples};
    }

    void validate() const
    {
        require(n_channels == config.n_channels() && n_samples == config.n_samples,
                "cube: dimensions disagree with chirp config");
        require(data.size() == static_cast<std::size_t>(n_frames) * n_channels * n_samples,
                "cube: data size disagrees with dimensions");
        require(geometry.size() == n_channels, "cube: channel geometry does not match channel count");
    }
};

/// Unit vector along which a scatterer's radial displacement is applied.
inline Vec3 radial_direction(Vec3 p)
{
    const double r = p.norm();
    return r > 0 ? (1.0 / r) * p : Vec3{0, 0, 1};
}

/// Point-scatterer FMCW IF model. For channel n and scatterer i at its
/// displaced position, sample s of a frame is
///   a_i * exp(j 2 pi (k r / c * t_s + r / lambda))
/// with r the TX->scatterer->RX path and t_s the centred fast time. All
/// channels sample the same frame instant. Complex white Gaussian noise is
/// added with per-sample power max(a_i)^2 / 10^(snr/10); std::nullopt renders
/// a noiseless cube. Each frame draws its noise from a substream seeded by
/// (seed, frame index).
inline RadarFrameCube render_frames(const MotionProfile& profile, const TorsoPhantom& phantom, const ChirpConfig& cfg,
                                    const ChannelGeometry& geometry, std::optional<double> snr_db, std::uint64_t seed)
{
    cfg.validate();
    phantom.validate();
    require(profile.n_scatterers() == phantom.scatterers.size(), "render_frames: profile/phantom size mismatch");
    require(geometry.size() == cfg.n_channels(), "render_frames: geometry/channel count mismatch");
    if (snr_db) require(std::isfinite(*snr_db), "render_frames: snr_db must be finite");

    const auto n_frames = static_cast<std::uint32_t>(profile.n_frames());
    RadarFrameCube cube(n_frames, cfg, geometry);
    const std::uint32_t ns = cfg.n_samples;
    const double lambda = cfg.wavelength();
    const double beat_per_m = cfg.slope / kSpeedOfLight; // Hz per metre of path
    const double t0 = cfg.fast_time(0);
    const double dt = 1.0 / cfg.adc_rate;

    std::vector<Vec3> dirs;
    double strongest = 0.0;
    for (const auto& sc : phantom.scatterers) {
        dirs.push_back(radial_direction(sc.position));
        strongest = std::max(strongest, sc.reflectivity);
    }

    std::vector<cdouble> tone(ns);
    for (std::uint32_t f = 0; f < n_frames; ++f) {
        for (std::uint32_t ch = 0; ch < cfg.n_channels(); ++ch) {
            cdouble* out = &cube.at(f, ch, 0);
            for (std::size_t i = 0; i < phantom.scatterers.size(); ++i) {
                const auto& sc = phantom.scatterers[i];
                const Vec3 p = sc.position + profile.displacement(i, f) * dirs[i];
                const double r = round_trip(geometry[ch], p);
                const double fb = beat_per_m * r;
                const double carrier = std::fmod(r / lambda, 1.0);
                const double start = std::fmod(fb * t0, 1.0) + carrier;
                cdouble z = std::polar(sc.reflectivity, kTwoPi * start);
                const cdouble step = std::polar(1.0, kTwoPi * std::fmod(fb * dt, 1.0));
                for (std::uint32_t s = 0; s < ns; ++s) {
                    out[s] += z;
                    z *= step;
                }
            }
        }
        if (snr_db) {
            const double power = strongest * strongest / std::pow(10.0, *snr_db / 10.0);
            const double sigma = std::sqrt(0.5 * power);
            std::mt19937_64 rng(mix_seed(seed, f));
            std::normal_distribution<double> gauss(0.0, sigma);
            cdouble* out = &cube.at(f, 0, 0);
            for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.n_channels()) * ns; ++k) {
                const double re = gauss(rng);
                const double im = gauss(rng);
                out[k] += cdouble(re, im);
            }
        }
    }
    return cube;
}

} // namespace cardiowave
