// Command-line front end: one subcommand per stage plus the end-to-end pipeline.
//
// Exit codes: 0 ok, 2 configuration/usage error, 3 stage error, 4 empty result.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cardiowave/cardiowave.hpp"

namespace cw = cardiowave;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageError = 3;
constexpr int kEmptyResult = 4;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

cw::PipelineConfig load(const Globals& g)
{
    cw::PipelineConfig cfg = g.config.empty() ? cw::PipelineConfig{} : cw::load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

void say(const Globals& g, const std::string& msg)
{
    if (g.verbose) std::clog << "cardiowave: " << msg << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cardiowave: synthetic FMCW radar to cardiac motion pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Configuration file (key = value)");
    app.add_option("--seed", g.seed, "Random seed, overrides the config");
    app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Synthesise a radar cube and its ground-truth ECG");
    std::optional<double> duration;
    std::string out_cube, out_ecg;
    sim->add_option("--duration", duration, "Trial length in seconds");
    sim->add_option("--out-cube", out_cube, "Output .rdc")->required();
    sim->add_option("--out-ecg", out_ecg, "Output .ecg")->required();

    // beamform
    auto* bf = app.add_subcommand("beamform", "Project a radar cube onto the voxel grid");
    std::string in_cube, grid_cfg, out_bvs;
    bf->add_option("--in-cube", in_cube, "Input .rdc")->required()->check(CLI::ExistingFile);
    bf->add_option("--grid", grid_cfg, "Config file holding the grid.* keys")->check(CLI::ExistingFile);
    bf->add_option("--out", out_bvs, "Output .bvs")->required();

    // extract
    auto* ex = app.add_subcommand("extract", "Phase extraction and micro-motion amplification");
    std::string ex_in, ex_out;
    ex->add_option("--in", ex_in, "Input .bvs")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "Output .msg")->required();

    // focus
    auto* fo = app.add_subcommand("focus", "Keep voxels whose motion matches a periodic template");
    std::string fo_in, fo_out, thr;
    std::optional<std::size_t> hmin, hmax, frames;
    fo->add_option("--in", fo_in, "Input .msg")->required()->check(CLI::ExistingFile);
    fo->add_option("--out", fo_out, "Output .msg with scores")->required();
    fo->add_option("--thr", thr, "Threshold: a number, or 'auto' for the median score");
    fo->add_option("--hmin", hmin, "Shortest segment (frames)");
    fo->add_option("--hmax", hmax, "Longest segment (frames)");
    fo->add_option("--analysis-frames", frames, "Score only this many leading frames (0 = all)");

    // cluster
    auto* cl = app.add_subcommand("cluster", "Power-weighted K-means into the cardiac measurement set");
    std::string cl_in, cl_out;
    std::optional<std::size_t> k;
    std::optional<double> rho_s, rho_l;
    cl->add_option("--in", cl_in, "Input .msg")->required()->check(CLI::ExistingFile);
    cl->add_option("--out", cl_out, "Output .cmm")->required();
    cl->add_option("--k", k, "Number of clusters");
    cl->add_option("--rho-s", rho_s, "Series distance weight");
    cl->add_option("--rho-l", rho_l, "Location distance weight");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Compare a predicted ECG with ground truth");
    std::string pred, truth, report, plot;
    ev->add_option("--pred", pred, "Predicted .ecg")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", truth, "Ground-truth .ecg")->required()->check(CLI::ExistingFile);
    ev->add_option("--report", report, "Output JSON report")->required();
    ev->add_option("--emit-plot-data", plot, "Write empirical CDF samples to this CSV");

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Run every stage with manifest-based skipping");
    std::string through, workdir;
    bool force = false;
    pl->add_option("--through", through, "Last stage to run (default from config: cluster)");
    pl->add_option("--workdir", workdir, "Directory for artifacts and manifest");
    pl->add_flag("--force", force, "Ignore the manifest and rerun every stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (sim->parsed()) {
            auto cfg = load(g);
            if (duration) cfg.sim.duration = *duration;
            cfg.validate();
            say(g, "simulating " + std::to_string(cfg.sim.duration) + " s");
            const auto trial = cw::simulate_trial(cfg);
            cw::io::write_cube(out_cube, trial.cube);
            cw::io::write_ecg(out_ecg, trial.ecg);
        } else if (bf->parsed()) {
            auto cfg = grid_cfg.empty() ? load(g) : cw::load_config(grid_cfg);
            const auto cube = cw::io::read_cube(in_cube);
            say(g, "beamforming " + std::to_string(cube.n_frames) + " frames onto " +
                       std::to_string(cfg.grid.size()) + " voxels");
            cw::io::write_bvs(out_bvs, cw::beamform(cube, cfg.grid));
        } else if (ex->parsed()) {
            const auto bvs = cw::io::read_bvs(ex_in);
            const auto signals = cw::extract_motion(bvs);
            say(g, std::to_string(signals.size()) + " of " + std::to_string(bvs.n_voxels()) + " voxels reliable");
            cw::io::write_msg(ex_out, signals);
        } else if (fo->parsed()) {
            auto cfg = load(g);
            if (!thr.empty()) cw::set_config_value(cfg, "focus.thr", thr);
            if (hmin) cfg.focus.segmentation.h_min = *hmin;
            if (hmax) cfg.focus.segmentation.h_max = *hmax;
            if (frames) cfg.focus.analysis_frames = *frames;
            cfg.validate();
            const auto msg = cw::io::read_msg(fo_in, cfg.chirp.frame_rate());
            const auto out = cw::focus_stage(msg.signals, cfg.focus);
            say(g, "threshold " + std::to_string(out.result.threshold) + ", kept " +
                       std::to_string(out.retained.size()) + " of " + std::to_string(msg.signals.size()));
            cw::io::write_msg(fo_out, out.retained, std::span<const cw::io::SignalScore>(out.scores));
            if (out.retained.empty()) throw cw::EmptyResult("focus: no cardiac signal found");
        } else if (cl->parsed()) {
            auto cfg = load(g);
            if (k) cfg.cluster.k = *k;
            if (rho_s) cfg.cluster.rho_s = *rho_s;
            if (rho_l) cfg.cluster.rho_l = *rho_l;
            cfg.validate();
            const auto msg = cw::io::read_msg(cl_in, cfg.chirp.frame_rate());
            if (msg.signals.empty()) throw cw::EmptyResult("cluster: input holds no signals");
            cw::io::write_cmm(cl_out, cw::cluster_stage(msg.signals, cfg));
        } else if (ev->parsed()) {
            const auto rep = cw::evaluate(cw::io::read_ecg(pred), cw::io::read_ecg(truth));
            std::ofstream os(report);
            os << cw::to_json(rep).dump(2) << '\n';
            if (!os) throw cw::Error("cannot write " + report);
            if (!plot.empty()) {
                std::ofstream csv(plot);
                cw::write_cdf_csv(csv, rep);
                if (!csv) throw cw::Error("cannot write " + plot);
            }
        } else if (pl->parsed()) {
            auto cfg = load(g);
            if (!through.empty()) cw::set_config_value(cfg, "pipeline.through", through);
            if (!workdir.empty()) cfg.workdir = workdir;
            cw::stage_rank(cfg.through);
            cw::PipelineOptions opt;
            opt.force = force;
            opt.log = [&](const std::string& m) { say(g, m); };
            const auto res = cw::run_pipeline(cfg, opt);
            std::cout << "ran " << res.ran.size() << " stage(s), skipped " << res.skipped.size() << '\n';
        }
    } catch (const cw::ConfigError& e) {
        std::cerr << "cardiowave: config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const cw::EmptyResult& e) {
        std::cerr << "cardiowave: " << e.what() << '\n';
        return kEmptyResult;
    } catch (const std::exception& e) {
        std::cerr << "cardiowave: " << e.what() << '\n';
        return kStageError;
    }
    return kOk;
}
