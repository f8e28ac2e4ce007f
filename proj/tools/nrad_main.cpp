#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrad/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string output_dir = "out";
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> batch_count;
    std::optional<std::size_t> batch_len;
    std::optional<std::string> window;
    std::optional<std::string> scene;
    std::optional<double> reference_velocity;
    std::optional<std::size_t> cpi_count;
    std::optional<std::vector<std::string>> modes;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("-c,--config", a.config_path, "experiment config JSON")->required();
    cmd->add_option("-o,--output-dir", a.output_dir, "output directory");
    cmd->add_option("--threads", a.threads, "worker thread count");
    cmd->add_option("--seed", a.seed, "waveform seed override");
    cmd->add_option("--batch-count", a.batch_count, "batches per CPI (P) override");
    cmd->add_option("--batch-len", a.batch_len, "samples per batch (M) override");
    cmd->add_option("--window", a.window, "rectangular|hann");
    cmd->add_option("--scene", a.scene, "scene file override");
    cmd->add_option("--reference-velocity", a.reference_velocity,
                    "hypothesis velocity override [m/s]");
    cmd->add_option("--cpi-count", a.cpi_count, "CPIs to process");
    cmd->add_option("--modes", a.modes, "compensation modes")->delimiter(',');
}

// Flag > file > default.
nlohmann::json overrides_from(const CommonArgs& a) {
    nlohmann::json j = nlohmann::json::object();
    if (a.threads) j["threads"] = *a.threads;
    if (a.seed) j["waveform"]["seed"] = *a.seed;
    if (a.batch_count) j["grid"]["batch_count"] = *a.batch_count;
    if (a.batch_len) j["grid"]["batch_len"] = *a.batch_len;
    if (a.window) j["window"] = *a.window;
    if (a.scene) j["scene_file"] = *a.scene;
    if (a.reference_velocity) j["reference_velocity_mps"] = *a.reference_velocity;
    if (a.cpi_count) j["cpi_count"] = *a.cpi_count;
    if (a.modes) j["modes"] = *a.modes;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-radar range-Doppler experiment runner"};
    app.require_subcommand(1);

    CommonArgs losses_args;
    CommonArgs sim_args;
    CommonArgs proc_args;
    CommonArgs gain_args;
    CommonArgs design_args;

    auto* losses = app.add_subcommand("losses", "write the loss-curve CSV");
    add_common(losses, losses_args);
    double losses_span = -1.0;
    double losses_step = -1.0;
    losses->add_option("--span", losses_span, "mismatch sweep span [m/s]");
    losses->add_option("--step", losses_step, "mismatch sweep step [m/s]");

    auto* simulate = app.add_subcommand("simulate", "generate waveform and echo files");
    add_common(simulate, sim_args);

    auto* process = app.add_subcommand("process", "range-Doppler maps and SINR reports");
    add_common(process, proc_args);

    auto* gain = app.add_subcommand("gain-curve", "SINR gain vs integration time");
    add_common(gain, gain_args);
    std::vector<double> start_times;
    int doublings = -1;
    std::string gain_mode;
    gain->add_option("--start-times", start_times, "CPI start times [s]")->delimiter(',');
    gain->add_option("--doublings", doublings, "number of doublings");
    gain->add_option("--mode", gain_mode, "none|doppler|stretch|both");

    auto* design = app.add_subcommand("design-grid", "required hypothesis spacing");
    add_common(design, design_args);
    double max_loss = -1.0;
    design->add_option("--max-loss-db", max_loss, "loss threshold [dB]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (losses->parsed()) {
            auto ov = overrides_from(losses_args);
            if (losses_span >= 0.0) ov["losses_sweep"]["span_mps"] = losses_span;
            if (losses_step > 0.0) ov["losses_sweep"]["step_mps"] = losses_step;
            const auto cfg = nrad::load_config(losses_args.config_path, ov);
            nrad::run_losses(cfg, losses_args.output_dir);
        } else if (simulate->parsed()) {
            const auto cfg = nrad::load_config(sim_args.config_path, overrides_from(sim_args));
            nrad::run_simulate(cfg, sim_args.output_dir);
        } else if (process->parsed()) {
            const auto cfg = nrad::load_config(proc_args.config_path, overrides_from(proc_args));
            nrad::run_process(cfg, proc_args.output_dir);
        } else if (gain->parsed()) {
            auto ov = overrides_from(gain_args);
            if (!start_times.empty()) ov["gain_curve"]["start_times_s"] = start_times;
            if (doublings >= 0) ov["gain_curve"]["doublings"] = doublings;
            if (!gain_mode.empty()) ov["gain_curve"]["mode"] = gain_mode;
            const auto cfg = nrad::load_config(gain_args.config_path, ov);
            nrad::run_gain_curve(cfg, gain_args.output_dir);
        } else if (design->parsed()) {
            auto ov = overrides_from(design_args);
            if (max_loss > 0.0) ov["design_max_loss_db"] = max_loss;
            const auto cfg = nrad::load_config(design_args.config_path, ov);
            nrad::run_design_grid(cfg, design_args.output_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
