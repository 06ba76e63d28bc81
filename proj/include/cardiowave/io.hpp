#pragma once

// Little-endian binary interchange files:
//   .rdc  raw radar cube          .bvs  beamformed voxel series
//   .msg  motion signals          .cmm  cardiac measurement set
//   .ecg  ECG trace with beat annotations

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cardiowave/beamform.hpp"
#include "cardiowave/common.hpp"
#include "cardiowave/ecg.hpp"
#include "cardiowave/micromotion.hpp"
#include "cardiowave/radar_sim.hpp"
#include "cardiowave/spatial_filter.hpp"

static_assert(std::endian::native == std::endian::little, "cardiowave file I/O assumes a little-endian host");

namespace cardiowave::io {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary | std::ios::trunc)
    {
        if (!os_) throw Error("cannot open " + path.string() + " for writing");
    }

    void magic(const char (&m)[5]) { raw(m, 4); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(double v)
    {
        const auto f = static_cast<float>(v);
        raw(&f, 4);
    }
    void text(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void close()
    {
        os_.flush();
        if (!os_) throw Error("write failed: " + path_.string());
        os_.close();
    }

private:
    void raw(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

    std::filesystem::path path_;
    std::ofstream os_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw Error("cannot open " + path.string());
        buf_.assign(std::istreambuf_iterator<char>(is), {});
    }

    void expect_magic(const char (&m)[5])
    {
        need(4);
        if (std::memcmp(buf_.data() + pos_, m, 4) != 0)
            throw FormatError(path_.string() + ": bad magic, expected " + std::string(m, 4));
        pos_ += 4;
    }
    bool peek_magic(const char (&m)[5]) const
    {
        return pos_ + 4 <= buf_.size() && std::memcmp(buf_.data() + pos_, m, 4) == 0;
    }
    std::uint32_t u32()
    {
        std::uint32_t v;
        get(&v, 4);
        return v;
    }
    double f32()
    {
        float v;
        get(&v, 4);
        return v;
    }
    std::string text()
    {
        const std::uint32_t n = u32();
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool at_end() const { return pos_ == buf_.size(); }
    void expect_end() const
    {
        if (!at_end()) throw FormatError(path_.string() + ": trailing bytes");
    }
    /// Guards element counts read from the file against the bytes left.
    void need_elements(std::size_t count, std::size_t bytes_each) const
    {
        if (bytes_each != 0 && count > (buf_.size() - pos_) / bytes_each)
            throw FormatError(path_.string() + ": truncated file");
    }

private:
    void need(std::size_t n) const
    {
        if (buf_.size() - pos_ < n) throw FormatError(path_.string() + ": truncated file");
    }
    void get(void* p, std::size_t n)
    {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::filesystem::path path_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

// ---- metadata helpers ----

inline nlohmann::json chirp_to_json(const ChirpConfig& c)
{
    return {{"start_freq", c.start_freq}, {"slope", c.slope},     {"idle_time", c.idle_time},
            {"ramp_end_time", c.ramp_end_time}, {"n_samples", c.n_samples}, {"adc_rate", c.adc_rate},
            {"frame_period", c.frame_period},   {"n_tx", c.n_tx},         {"n_rx", c.n_rx}};
}

inline ChirpConfig chirp_from_json(const nlohmann::json& j)
{
    ChirpConfig c;
    c.start_freq = j.at("start_freq").get<double>();
    c.slope = j.at("slope").get<double>();
    c.idle_time = j.at("idle_time").get<double>();
    c.ramp_end_time = j.at("ramp_end_time").get<double>();
    c.n_samples = j.at("n_samples").get<std::uint32_t>();
    c.adc_rate = j.at("adc_rate").get<double>();
    c.frame_period = j.at("frame_period").get<double>();
    c.n_tx = j.at("n_tx").get<std::uint32_t>();
    c.n_rx = j.at("n_rx").get<std::uint32_t>();
    return c;
}

// ---- .rdc ----

inline void write_cube(const std::filesystem::path& path, const RadarFrameCube& cube)
{
    cube.validate();
    Writer w(path);
    w.magic("RDC1");
    w.u32(cube.n_frames);
    w.u32(cube.n_channels);
    w.u32(cube.n_samples);
    for (const auto& z : cube.data) {
        w.f32(z.real());
        w.f32(z.imag());
    }
    nlohmann::json meta;
    meta["chirp"] = chirp_to_json(cube.config);
    for (const auto& ch : cube.geometry)
        meta["geometry"].push_back({ch.tx.x, ch.tx.y, ch.tx.z, ch.rx.x, ch.rx.y, ch.rx.z});
    w.text(meta.dump());
    w.close();
}

inline RadarFrameCube read_cube(const std::filesystem::path& path)
{
    Reader r(path);
    r.expect_magic("RDC1");
    RadarFrameCube cube;
    cube.n_frames = r.u32();
    cube.n_channels = r.u32();
    cube.n_samples = r.u32();
    const std::size_t count = static_cast<std::size_t>(cube.n_frames) * cube.n_channels * cube.n_samples;
    r.need_elements(count, 8);
    cube.data.resize(count);
    for (auto& z : cube.data) {
        const double re = r.f32();
        const double im = r.f32();
        z = {re, im};
    }
    try {
        const auto meta = nlohmann::json::parse(r.text());
        cube.config = chirp_from_json(meta.at("chirp"));
        for (const auto& g : meta.at("geometry")) {
            const auto v = g.get<std::vector<double>>();
            if (v.size() != 6) throw FormatError(path.string() + ": bad channel geometry entry");
            cube.geometry.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad metadata: " + e.what());
    }
    r.expect_end();
    try {
        cube.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return cube;
}

// ---- .ecg ----

inline void write_ecg(const std::filesystem::path& path, const EcgTrace& ecg)
{
    Writer w(path);
    w.magic("ECG1");
    w.u32(static_cast<std::uint32_t>(ecg.samples.size()));
    w.u32(ecg.sample_rate);
    for (double v : ecg.samples) w.f32(v);
    w.u32(static_cast<std::uint32_t>(ecg.beats.size()));
    for (const auto& b : ecg.beats) {
        w.u32(b.p);
        w.u32(b.q);
        w.u32(b.r);
        w.u32(b.s);
        w.u32(b.t);
    }
    w.close();
}

inline EcgTrace read_ecg(const std::filesystem::path& path)
{
    Reader r(path);
    r.expect_magic("ECG1");
    EcgTrace ecg;
    const std::uint32_t n = r.u32();
    ecg.sample_rate = r.u32();
    r.need_elements(n, 4);
    ecg.samples.resize(n);
    for (auto& v : ecg.samples) v = r.f32();
    const std::uint32_t nb = r.u32();
    r.need_elements(nb, 20);
    ecg.beats.resize(nb);
    for (auto& b : ecg.beats) {
        b.p = r.u32();
        b.q = r.u32();
        b.r = r.u32();
        b.s = r.u32();
        b.t = r.u32();
    }
    r.expect_end();
    if (ecg.sample_rate == 0) throw FormatError(path.string() + ": zero sample rate");
    return ecg;
}

// ---- .bvs ----

inline void write_bvs(const std::filesystem::path& path, const BeamformedVoxelSeries& bvs)
{
    Writer w(path);
    w.magic("BVS1");
    for (auto c : bvs.grid.counts) w.u32(c);
    for (double v : {bvs.grid.lo.x, bvs.grid.lo.y, bvs.grid.lo.z, bvs.grid.hi.x, bvs.grid.hi.y, bvs.grid.hi.z})
        w.f32(v);
    w.u32(bvs.n_frames);
    w.f32(bvs.frame_rate);
    for (const auto& z : bvs.data) {
        w.f32(z.real());
        w.f32(z.imag());
    }
    w.close();
}

inline BeamformedVoxelSeries read_bvs(const std::filesystem::path& path)
{
    Reader r(path);
    r.expect_magic("BVS1");
    BeamformedVoxelSeries bvs;
    for (auto& c : bvs.grid.counts) c = r.u32();
    double b[6];
    for (double& v : b) v = r.f32();
    bvs.grid.lo = {b[0], b[1], b[2]};
    bvs.grid.hi = {b[3], b[4], b[5]};
    bvs.n_frames = r.u32();
    bvs.frame_rate = r.f32();
    const std::size_t count = bvs.grid.size() * bvs.n_frames;
    r.need_elements(count, 8);
    bvs.data.resize(count);
    for (auto& z : bvs.data) {
        const double re = r.f32();
        const double im = r.f32();
        z = {re, im};
    }
    r.expect_end();
    return bvs;
}

// ---- .msg ----

/// Per-signal focus scores carried in the optional "SCOR" trailer.
struct SignalScore {
    double relative = 0.0;
    double score = 0.0;
};

struct MotionFile {
    std::vector<MotionSignal> signals;
    std::optional<std::vector<SignalScore>> scores;
};

inline void write_msg(const std::filesystem::path& path, std::span<const MotionSignal> signals,
                      std::optional<std::span<const SignalScore>> scores = std::nullopt)
{
    if (scores) require(scores->size() == signals.size(), "write_msg: one score per signal required");
    Writer w(path);
    w.magic("MSG1");
    w.u32(static_cast<std::uint32_t>(signals.size()));
    for (const auto& s : signals) {
        require(s.phase.size() == s.acceleration.size(), "write_msg: phase/acceleration length mismatch");
        w.f32(s.location.x);
        w.f32(s.location.y);
        w.f32(s.location.z);
        w.f32(s.power);
        w.u32(static_cast<std::uint32_t>(s.phase.size()));
        for (double v : s.phase) w.f32(v);
        for (double v : s.acceleration) w.f32(v);
    }
    if (scores) {
        w.magic("SCOR");
        w.u32(static_cast<std::uint32_t>(scores->size()));
        for (const auto& sc : *scores) {
            w.f32(sc.relative);
            w.f32(sc.score);
        }
    }
    w.close();
}

inline MotionFile read_msg(const std::filesystem::path& path, double frame_rate = 200.0)
{
    Reader r(path);
    r.expect_magic("MSG1");
    MotionFile out;
    const std::uint32_t n = r.u32();
    r.need_elements(n, 20);
    out.signals.resize(n);
    for (auto& s : out.signals) {
        s.location.x = r.f32();
        s.location.y = r.f32();
        s.location.z = r.f32();
        s.power = r.f32();
        s.frame_rate = frame_rate;
        const std::uint32_t len = r.u32();
        r.need_elements(len, 8);
        s.phase.resize(len);
        s.acceleration.resize(len);
        for (auto& v : s.phase) v = r.f32();
        for (auto& v : s.acceleration) v = r.f32();
    }
    if (r.peek_magic("SCOR")) {
        r.expect_magic("SCOR");
        const std::uint32_t m = r.u32();
        if (m != n) throw FormatError(path.string() + ": score count does not match signal count");
        std::vector<SignalScore> sc(m);
        for (auto& s : sc) {
            s.relative = r.f32();
            s.score = r.f32();
        }
        out.scores = std::move(sc);
    }
    r.expect_end();
    return out;
}

// ---- .cmm ----

inline void write_cmm(const std::filesystem::path& path, const CardiacMeasurementSet& set)
{
    Writer w(path);
    w.magic("CMM1");
    w.u32(static_cast<std::uint32_t>(set.entries.size()));
    w.u32(set.frames);
    w.u32(set.frame_rate);
    for (const auto& e : set.entries) {
        require(e.motion.size() == set.frames, "write_cmm: series length differs from frame count");
        w.f32(e.location.x);
        w.f32(e.location.y);
        w.f32(e.location.z);
        w.f32(e.power);
        for (double v : e.motion) w.f32(v);
    }
    w.close();
}

inline CardiacMeasurementSet read_cmm(const std::filesystem::path& path)
{
    Reader r(path);
    r.expect_magic("CMM1");
    CardiacMeasurementSet set;
    const std::uint32_t n = r.u32();
    set.frames = r.u32();
    set.frame_rate = r.u32();
    r.need_elements(n, 16 + 4 * static_cast<std::size_t>(set.frames));
    set.entries.resize(n);
    for (auto& e : set.entries) {
        e.location.x = r.f32();
        e.location.y = r.f32();
        e.location.z = r.f32();
        e.power = r.f32();
        e.motion.resize(set.frames);
        for (auto& v : e.motion) v = r.f32();
    }
    r.expect_end();
    return set;
}

} // namespace cardiowave::io
