#pragma once

// Pipeline configuration: flat "key = value" lines with dotted section
// prefixes, '#' comments, unknown keys rejected.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "cardiowave/beamform.hpp"
#include "cardiowave/focus.hpp"
#include "cardiowave/radar_sim.hpp"
#include "cardiowave/spatial_filter.hpp"

namespace cardiowave {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct SimulationConfig {
    double duration = 60.0;    // s
    double hr_start = 60.0;    // BPM
    double hr_end = 90.0;      // BPM, linear ramp over the trial
    double jitter = 0.02;
    std::optional<double> snr_db = 20.0;
    BreathingParams breathing;
    CardiacKernel kernel;
    std::uint32_t phantom_rows = 8;
    std::uint32_t phantom_cols = 8;
    double phantom_height = 0.3;
    double phantom_width = 0.4;
    double phantom_z = 0.45;
};

struct PipelineConfig {
    ChirpConfig chirp;
    VoxelGrid grid;
    SimulationConfig sim;
    FocusParams focus{{}, FocusThreshold::median(), 800};
    ClusterOptions cluster;
    std::uint64_t seed = 1;
    std::string workdir = "cardiowave_out";
    std::string through = "cluster";
    std::string transform_command;

    void validate() const
    {
        try {
            chirp.validate();
            grid.validate();
            sim.breathing.validate();
            require(sim.duration > 0, "sim.duration must be positive");
            require(focus.segmentation.h_min > 0 && focus.segmentation.h_min <= focus.segmentation.h_max,
                    "focus: need 0 < h_min <= h_max");
            require(cluster.k > 0, "cluster.k must be positive");
            require(cluster.rho_s >= 0 && cluster.rho_l >= 0, "cluster weights must be non-negative");
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("config: " + key + ": expected a number, got '" + v + "'");
    return out;
}

template <typename U>
U to_unsigned(const std::string& key, const std::string& v)
{
    U out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("config: " + key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: " + key + ": expected true/false, got '" + v + "'");
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Field {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

inline std::map<std::string, Field> fields(PipelineConfig& c)
{
    std::map<std::string, Field> f;
    auto real = [&f](const std::string& k, double& x) {
        f[k] = {[&x, k](const std::string& v) { x = to_double(k, v); }, [&x] { return fmt(x); }};
    };
    auto u32 = [&f](const std::string& k, std::uint32_t& x) {
        f[k] = {[&x, k](const std::string& v) { x = to_unsigned<std::uint32_t>(k, v); },
                [&x] { return std::to_string(x); }};
    };
    auto size = [&f](const std::string& k, std::size_t& x) {
        f[k] = {[&x, k](const std::string& v) { x = to_unsigned<std::size_t>(k, v); },
                [&x] { return std::to_string(x); }};
    };
    auto flag = [&f](const std::string& k, bool& x) {
        f[k] = {[&x, k](const std::string& v) { x = to_bool(k, v); }, [&x] { return std::string(x ? "true" : "false"); }};
    };
    auto text = [&f](const std::string& k, std::string& x) {
        f[k] = {[&x](const std::string& v) { x = v; }, [&x] { return x; }};
    };

    real("chirp.start_freq", c.chirp.start_freq);
    real("chirp.slope", c.chirp.slope);
    real("chirp.idle_time", c.chirp.idle_time);
    real("chirp.ramp_end_time", c.chirp.ramp_end_time);
    u32("chirp.n_samples", c.chirp.n_samples);
    real("chirp.adc_rate", c.chirp.adc_rate);
    real("chirp.frame_period", c.chirp.frame_period);
    u32("chirp.n_tx", c.chirp.n_tx);
    u32("chirp.n_rx", c.chirp.n_rx);

    real("grid.x_min", c.grid.lo.x);
    real("grid.x_max", c.grid.hi.x);
    real("grid.y_min", c.grid.lo.y);
    real("grid.y_max", c.grid.hi.y);
    real("grid.z_min", c.grid.lo.z);
    real("grid.z_max", c.grid.hi.z);
    u32("grid.nx", c.grid.counts[0]);
    u32("grid.ny", c.grid.counts[1]);
    u32("grid.nz", c.grid.counts[2]);

    real("sim.duration", c.sim.duration);
    real("sim.hr_start", c.sim.hr_start);
    real("sim.hr_end", c.sim.hr_end);
    real("sim.jitter", c.sim.jitter);
    f["sim.snr_db"] = {[&c](const std::string& v) {
                           if (v == "none") c.sim.snr_db.reset();
                           else c.sim.snr_db = to_double("sim.snr_db", v);
                       },
                       [&c] { return c.sim.snr_db ? fmt(*c.sim.snr_db) : std::string("none"); }};
    flag("sim.breathing", c.sim.breathing.enabled);
    real("sim.breathing_amplitude", c.sim.breathing.amplitude);
    real("sim.breathing_rate", c.sim.breathing.rate);
    real("sim.cardiac_amplitude", c.sim.kernel.amplitude);
    u32("sim.phantom_rows", c.sim.phantom_rows);
    u32("sim.phantom_cols", c.sim.phantom_cols);
    real("sim.phantom_height", c.sim.phantom_height);
    real("sim.phantom_width", c.sim.phantom_width);
    real("sim.phantom_z", c.sim.phantom_z);

    size("focus.h_min", c.focus.segmentation.h_min);
    size("focus.h_max", c.focus.segmentation.h_max);
    size("focus.band", c.focus.segmentation.band);
    size("focus.max_candidates", c.focus.segmentation.max_candidates);
    size("focus.analysis_frames", c.focus.analysis_frames);
    f["focus.thr"] = {[&c](const std::string& v) {
                          if (v == "auto" || v == "median") c.focus.threshold = FocusThreshold::median();
                          else c.focus.threshold = FocusThreshold::fixed(to_double("focus.thr", v));
                      },
                      [&c] {
                          return c.focus.threshold.mode == FocusThreshold::Mode::median ? std::string("median")
                                                                                        : fmt(c.focus.threshold.value);
                      }};

    size("cluster.k", c.cluster.k);
    real("cluster.rho_s", c.cluster.rho_s);
    real("cluster.rho_l", c.cluster.rho_l);
    size("cluster.max_iterations", c.cluster.max_iterations);
    flag("cluster.standardize", c.cluster.standardize);

    f["seed"] = {[&c](const std::string& v) { c.seed = to_unsigned<std::uint64_t>("seed", v); },
                 [&c] { return std::to_string(c.seed); }};
    text("paths.workdir", c.workdir);
    text("pipeline.through", c.through);
    text("transform.command", c.transform_command);
    return f;
}

} // namespace detail

/// Applies one key = value assignment; throws ConfigError for unknown keys.
inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value)
{
    auto f = detail::fields(cfg);
    const auto it = f.find(key);
    if (it == f.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(value);
}

inline std::string get_config_value(PipelineConfig& cfg, const std::string& key)
{
    auto f = detail::fields(cfg);
    const auto it = f.find(key);
    if (it == f.end()) throw ConfigError("config: unknown key '" + key + "'");
    return it->second.get();
}

inline PipelineConfig parse_config(const std::string& text, PipelineConfig cfg = {})
{
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    const std::string through = cfg.through;
    if (through != "simulate" && through != "beamform" && through != "extract" && through != "focus" &&
        through != "cluster" && through != "transform" && through != "evaluate")
        throw ConfigError("config: pipeline.through must name a stage, got '" + through + "'");
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text of every key, sorted; parse_config(to_text(c)) reproduces c.
inline std::string to_text(PipelineConfig cfg)
{
    std::string out;
    for (auto& [k, f] : detail::fields(cfg)) out += k + " = " + f.get() + "\n";
    return out;
}

} // namespace cardiowave
