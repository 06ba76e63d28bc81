#pragma once

// Stage functions and the end-to-end runner. Every stage writes its outputs
// into the work directory and records input/output checksums in
// manifest.json; a stage is skipped when its config hash and every recorded
// checksum still match.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cardiowave/config.hpp"
#include "cardiowave/eval_metrics.hpp"
#include "cardiowave/io.hpp"

namespace cardiowave {

namespace fs = std::filesystem;

/// A stage failed; carries the stage name and the checksum of its first input.
class StageError : public Error {
public:
    StageError(std::string stage, std::string input_checksum, const std::string& what)
        : Error("stage '" + stage + "' failed (input checksum " + (input_checksum.empty() ? "-" : input_checksum) +
                "): " + what),
          stage_(std::move(stage)), checksum_(std::move(input_checksum))
    {
    }
    [[nodiscard]] const std::string& stage() const { return stage_; }
    [[nodiscard]] const std::string& input_checksum() const { return checksum_; }

private:
    std::string stage_;
    std::string checksum_;
};

/// Focusing kept no voxel.
class EmptyResult : public Error {
public:
    using Error::Error;
};

// ---- checksums ----

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string file_checksum(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    std::vector<char> buf(1 << 16);
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(is.gcount())), h);
    }
    return hex64(h);
}

// ---- stage functions ----

struct SimulatedTrial {
    RadarFrameCube cube;
    EcgTrace ecg;
};

inline std::uint32_t frame_rate_hz(const ChirpConfig& chirp)
{
    return static_cast<std::uint32_t>(std::lround(chirp.frame_rate()));
}

inline TorsoPhantom make_phantom(const SimulationConfig& sim)
{
    return default_phantom(sim.phantom_rows, sim.phantom_cols, sim.phantom_height, sim.phantom_width, sim.phantom_z);
}

inline SimulatedTrial simulate_trial(const PipelineConfig& cfg)
{
    const auto hr = cfg.sim.hr_start == cfg.sim.hr_end ? HeartRateProfile::constant(cfg.sim.hr_start)
                                                       : HeartRateProfile::ramp(cfg.sim.hr_start, cfg.sim.hr_end, cfg.sim.duration);
    EcgSynthOptions opt;
    opt.sample_rate = frame_rate_hz(cfg.chirp);
    opt.period_jitter = cfg.sim.jitter;
    SimulatedTrial out;
    out.ecg = synth_ecg(cfg.sim.duration, hr, cfg.seed, opt);
    const auto phantom = make_phantom(cfg.sim);
    const auto motion = ecg_to_surface_motion(out.ecg, phantom, cfg.sim.breathing, cfg.sim.kernel);
    out.cube = render_frames(motion, phantom, cfg.chirp, default_channel_geometry(cfg.chirp), cfg.sim.snr_db, cfg.seed);
    return out;
}

struct FocusOutput {
    std::vector<MotionSignal> retained;
    std::vector<io::SignalScore> scores; // one per retained signal
    FocusResult result;
};

inline FocusOutput focus_stage(std::span<const MotionSignal> signals, const FocusParams& prm)
{
    FocusOutput out;
    out.result = focus_voxels(signals, prm);
    for (const auto& f : out.result.retained) {
        out.retained.push_back(signals[f.source]);
        out.scores.push_back({f.match.relative_score, f.match.score});
    }
    return out;
}

/// Clusters the focused signals into K centroids (fewer when fewer signals
/// survived focusing) and emits exactly K measurement entries.
inline CardiacMeasurementSet cluster_stage(std::span<const MotionSignal> signals, const PipelineConfig& cfg)
{
    require(!signals.empty(), "cluster: no signals to cluster");
    ClusterOptions opt = cfg.cluster;
    opt.k = std::min(cfg.cluster.k, signals.size());
    opt.location_scale = cfg.grid.diagonal();
    opt.seed = cfg.seed;
    const auto model = cluster(signals, opt);
    return emit_measurements(model, cfg.cluster.k, cfg.grid.middle(), frame_rate_hz(cfg.chirp));
}

/// Runs the external transform command with {in} and {out} replaced by the
/// quoted .cmm input and .ecg output paths.
inline void run_transform(const std::string& command, const fs::path& in, const fs::path& out)
{
    require(!command.empty(), "transform: transform.command is empty");
    auto quote = [](const fs::path& p) {
        std::string s = "'";
        for (char c : p.string()) s += c == '\'' ? std::string("'\\''") : std::string(1, c);
        return s + "'";
    };
    std::string cmd = command;
    for (const auto& [key, val] : {std::pair{std::string("{in}"), quote(in)}, std::pair{std::string("{out}"), quote(out)}}) {
        for (std::size_t pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + val.size()))
            cmd.replace(pos, key.size(), val);
    }
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw Error("transform command exited with status " + std::to_string(rc));
    if (!fs::exists(out)) throw Error("transform command did not write " + out.string());
}

// ---- manifest and runner ----

inline constexpr const char* kStages[] = {"simulate", "beamform", "extract", "focus", "cluster", "transform", "evaluate"};

inline std::size_t stage_rank(const std::string& name)
{
    for (std::size_t i = 0; i < std::size(kStages); ++i)
        if (name == kStages[i]) return i;
    throw ConfigError("unknown stage '" + name + "'");
}

/// Hash of the config keys a stage depends on.
inline std::string stage_config_hash(const PipelineConfig& cfg, const std::string& stage)
{
    std::vector<std::string> prefixes;
    if (stage == "simulate") prefixes = {"chirp.", "sim.", "seed"};
    else if (stage == "beamform") prefixes = {"grid."};
    else if (stage == "focus") prefixes = {"focus."};
    else if (stage == "cluster") prefixes = {"cluster.", "grid.", "seed", "chirp.frame_period"};
    else if (stage == "transform") prefixes = {"transform."};
    std::string relevant = stage + "\n";
    std::istringstream is(to_text(cfg));
    std::string line;
    while (std::getline(is, line))
        for (const auto& p : prefixes)
            if (line.rfind(p, 0) == 0) relevant += line + "\n";
    return hex64(fnv1a64(relevant));
}

struct StageRecord {
    std::string name;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> inputs;  // file name, checksum
    std::vector<std::pair<std::string, std::string>> outputs;
};

struct Manifest {
    std::vector<StageRecord> stages;

    [[nodiscard]] const StageRecord* find(const std::string& name) const
    {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }
    void put(StageRecord rec)
    {
        for (auto& s : stages)
            if (s.name == rec.name) {
                s = std::move(rec);
                return;
            }
        stages.push_back(std::move(rec));
    }
};

inline nlohmann::json to_json(const Manifest& m)
{
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : m.stages) {
        nlohmann::json r;
        r["name"] = s.name;
        r["config_hash"] = s.config_hash;
        r["inputs"] = nlohmann::json::object();
        r["outputs"] = nlohmann::json::object();
        for (const auto& [f, c] : s.inputs) r["inputs"][f] = c;
        for (const auto& [f, c] : s.outputs) r["outputs"][f] = c;
        j["stages"].push_back(r);
    }
    return j;
}

inline Manifest read_manifest(const fs::path& path)
{
    Manifest m;
    if (!fs::exists(path)) return m;
    std::ifstream is(path);
    try {
        const auto j = nlohmann::json::parse(is);
        for (const auto& r : j.at("stages")) {
            StageRecord s;
            s.name = r.at("name").get<std::string>();
            s.config_hash = r.at("config_hash").get<std::string>();
            for (const auto& [f, c] : r.at("inputs").items()) s.inputs.emplace_back(f, c.get<std::string>());
            for (const auto& [f, c] : r.at("outputs").items()) s.outputs.emplace_back(f, c.get<std::string>());
            m.stages.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad manifest: " + e.what());
    }
    return m;
}

inline void write_manifest(const fs::path& path, const Manifest& m)
{
    std::ofstream os(path);
    os << to_json(m).dump(2) << '\n';
    if (!os) throw Error("cannot write " + path.string());
}

struct PipelineOptions {
    bool force = false; // ignore the manifest and rerun every stage
    std::function<void(const std::string&)> log = [](const std::string&) {};
};

struct PipelineResult {
    Manifest manifest;
    std::vector<std::string> ran;
    std::vector<std::string> skipped;
};

/// Artifact file names inside the work directory.
namespace artifact {
inline constexpr const char* cube = "trial.rdc";
inline constexpr const char* truth = "truth.ecg";
inline constexpr const char* voxels = "voxels.bvs";
inline constexpr const char* motion = "motion.msg";
inline constexpr const char* focused = "focused.msg";
inline constexpr const char* cardiac = "cardiac.cmm";
inline constexpr const char* prediction = "pred.ecg";
inline constexpr const char* report = "report.json";
} // namespace artifact

/// Runs simulate -> beamform -> extract -> focus -> cluster [-> transform -> evaluate]
/// up to cfg.through inside cfg.workdir.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineOptions& opt = {})
{
    cfg.validate();
    const fs::path dir = cfg.workdir;
    fs::create_directories(dir);
    const fs::path manifest_path = dir / "manifest.json";
    PipelineResult res;
    res.manifest = opt.force ? Manifest{} : read_manifest(manifest_path);
    const std::size_t last = stage_rank(cfg.through);

    auto run = [&](const std::string& name, std::vector<std::string> inputs, std::vector<std::string> outputs,
                   const std::function<void()>& body) {
        if (stage_rank(name) > last) return;
        const std::string hash = stage_config_hash(cfg, name);
        std::vector<std::pair<std::string, std::string>> in_sums;
        for (const auto& f : inputs) {
            if (!fs::exists(dir / f)) throw StageError(name, "", "missing input " + f);
            in_sums.emplace_back(f, file_checksum(dir / f));
        }
        const std::string first_sum = in_sums.empty() ? std::string() : in_sums.front().second;

        if (const StageRecord* rec = res.manifest.find(name); rec && rec->config_hash == hash && rec->inputs == in_sums) {
            bool present = true;
            for (const auto& [f, sum] : rec->outputs) {
                if (!fs::exists(dir / f)) {
                    present = false;
                    continue;
                }
                const std::string now = file_checksum(dir / f);
                if (now != sum)
                    throw StageError(name, first_sum,
                                     "checksum mismatch for " + f + " (recorded " + sum + ", found " + now + ")");
            }
            if (present && rec->outputs.size() == outputs.size()) {
                opt.log("skip " + name);
                res.skipped.push_back(name);
                return;
            }
        }

        opt.log("run " + name);
        try {
            body();
        } catch (const EmptyResult&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, first_sum, e.what());
        }
        StageRecord rec{name, hash, in_sums, {}};
        for (const auto& f : outputs) rec.outputs.emplace_back(f, file_checksum(dir / f));
        res.manifest.put(std::move(rec));
        write_manifest(manifest_path, res.manifest);
        res.ran.push_back(name);
    };

    run("simulate", {}, {artifact::cube, artifact::truth}, [&] {
        const auto trial = simulate_trial(cfg);
        io::write_cube(dir / artifact::cube, trial.cube);
        io::write_ecg(dir / artifact::truth, trial.ecg);
    });
    run("beamform", {artifact::cube}, {artifact::voxels}, [&] {
        const auto cube = io::read_cube(dir / artifact::cube);
        io::write_bvs(dir / artifact::voxels, beamform(cube, cfg.grid));
    });
    run("extract", {artifact::voxels}, {artifact::motion}, [&] {
        const auto bvs = io::read_bvs(dir / artifact::voxels);
        io::write_msg(dir / artifact::motion, extract_motion(bvs));
    });
    run("focus", {artifact::motion}, {artifact::focused}, [&] {
        const auto msg = io::read_msg(dir / artifact::motion, cfg.chirp.frame_rate());
        const auto out = focus_stage(msg.signals, cfg.focus);
        io::write_msg(dir / artifact::focused, out.retained, std::span<const io::SignalScore>(out.scores));
        if (out.retained.empty()) throw EmptyResult("focus: no cardiac signal found");
    });
    run("cluster", {artifact::focused}, {artifact::cardiac}, [&] {
        const auto msg = io::read_msg(dir / artifact::focused, cfg.chirp.frame_rate());
        if (msg.signals.empty()) throw EmptyResult("cluster: focused set is empty");
        io::write_cmm(dir / artifact::cardiac, cluster_stage(msg.signals, cfg));
    });
    run("transform", {artifact::cardiac}, {artifact::prediction},
        [&] { run_transform(cfg.transform_command, dir / artifact::cardiac, dir / artifact::prediction); });
    run("evaluate", {artifact::prediction, artifact::truth}, {artifact::report}, [&] {
        const auto rep = evaluate(io::read_ecg(dir / artifact::prediction), io::read_ecg(dir / artifact::truth));
        std::ofstream os(dir / artifact::report);
        os << to_json(rep).dump(2) << '\n';
        if (!os) throw Error("cannot write report");
    });
    return res;
}

} // namespace cardiowave
