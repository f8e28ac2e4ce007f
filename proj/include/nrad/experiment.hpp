#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrad/common.hpp"
#include "nrad/iq.hpp"
#include "nrad/loss.hpp"
#include "nrad/metrics.hpp"
#include "nrad/model.hpp"
#include "nrad/processor.hpp"
#include "nrad/scene.hpp"
#include "nrad/waveform.hpp"

namespace nrad {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over the canonical (sorted-key) config dump.
inline std::string config_hash_hex(const nlohmann::json& canonical) {
    const std::string s = canonical.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ExperimentConfig {
    RadarParams radar;
    BatchGrid grid;
    WindowKind window = WindowKind::Rectangular;
    std::uint64_t seed = 1;
    double rms_level = 1.0;
    std::string scene_file;
    std::size_t cpi_count = 1;
    std::size_t total_samples = 0;
    std::vector<std::string> modes{"none", "doppler", "stretch", "both", "resample"};
    double reference_velocity_mps = 0.0;
    std::optional<std::vector<VelocityHypothesis>> hypotheses;

    struct AutoGrid {
        double max_loss_db = 3.0;
        double span_mps = 0.0;
    };
    std::optional<AutoGrid> auto_grid;

    struct LossesSweep {
        double span_mps = 50.0;
        double step_mps = 0.1;
    } losses;

    struct GainCurveCfg {
        std::vector<double> start_times_s{0.0};
        unsigned doublings = 4;
        std::string mode = "both";
        std::size_t base_batch_count = 16;
    } gain;

    double design_max_loss_db = 3.0;
    unsigned threads = 1;

    nlohmann::json canonical;  // the parsed document, for hashing and metadata

    std::string hash() const { return config_hash_hex(canonical); }

    nlohmann::json meta() const {
        return {{"config_hash", hash()}, {"tool_version", kToolVersion}};
    }

    CPIConfig cpi_config() const { return CPIConfig(radar, grid, window); }
};

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.contains("radar")) fail_invalid("config: missing radar section");
    const auto& r = j.at("radar");
    RadarParams radar(r.at("carrier_freq_hz").get<double>(),
                      r.at("sample_rate_hz").get<double>(),
                      r.at("bandwidth_hz").get<double>(),
                      r.value("wave_speed_mps", kSpeedOfLightSI));
    if (!j.contains("grid")) fail_invalid("config: missing grid section");
    const auto& g = j.at("grid");
    BatchGrid grid(g.at("batch_count").get<std::size_t>(),
                   g.at("batch_len").get<std::size_t>(), radar.sample_rate_hz);

    ExperimentConfig cfg{radar, grid};
    cfg.window = window_from_name(j.value("window", std::string("rectangular")));
    if (j.contains("waveform")) {
        cfg.seed = j.at("waveform").value("seed", std::uint64_t{1});
        cfg.rms_level = j.at("waveform").value("rms_level", 1.0);
    }
    cfg.scene_file = j.value("scene_file", std::string{});
    cfg.cpi_count = j.value("cpi_count", std::size_t{1});
    if (cfg.cpi_count == 0) fail_invalid("config: cpi_count must be positive");
    cfg.total_samples = j.value("total_samples",
                                cfg.cpi_count * grid.total_samples());
    if (cfg.total_samples % grid.batch_len != 0 ||
        cfg.total_samples < cfg.cpi_count * grid.total_samples()) {
        fail_invalid("config: total_samples must be a multiple of batch_len covering all CPIs");
    }
    if (j.contains("modes")) {
        cfg.modes.clear();
        for (const auto& m : j.at("modes")) {
            const auto name = m.get<std::string>();
            if (name != "none" && name != "doppler" && name != "stretch" &&
                name != "both" && name != "resample") {
                fail_invalid("config: unknown mode " + name);
            }
            cfg.modes.push_back(name);
        }
    }
    cfg.reference_velocity_mps = j.value("reference_velocity_mps", 0.0);

    if (j.contains("hypotheses") && j.contains("auto_grid")) {
        fail_invalid("config: hypotheses and auto_grid are mutually exclusive");
    }
    if (j.contains("hypotheses")) {
        std::vector<VelocityHypothesis> hyps;
        for (const auto& h : j.at("hypotheses")) {
            hyps.push_back({h.at("velocity_mps").get<double>(),
                            h.value("doppler", true), h.value("stretch", true)});
        }
        if (hyps.empty()) fail_invalid("config: hypotheses list is empty");
        cfg.hypotheses = std::move(hyps);
    }
    if (j.contains("auto_grid")) {
        ExperimentConfig::AutoGrid ag;
        ag.max_loss_db = j.at("auto_grid").value("max_loss_db", 3.0);
        ag.span_mps = j.at("auto_grid").at("span_mps").get<double>();
        cfg.auto_grid = ag;
    }
    if (j.contains("losses_sweep")) {
        cfg.losses.span_mps = j.at("losses_sweep").value("span_mps", 50.0);
        cfg.losses.step_mps = j.at("losses_sweep").value("step_mps", 0.1);
        if (!(cfg.losses.step_mps > 0.0)) fail_invalid("config: losses_sweep.step_mps must be positive");
    }
    if (j.contains("gain_curve")) {
        const auto& gc = j.at("gain_curve");
        if (gc.contains("start_times_s")) {
            cfg.gain.start_times_s.clear();
            for (const auto& t : gc.at("start_times_s")) {
                cfg.gain.start_times_s.push_back(t.get<double>());
            }
        }
        cfg.gain.doublings = gc.value("doublings", 4u);
        cfg.gain.mode = gc.value("mode", std::string("both"));
        cfg.gain.base_batch_count = gc.value("base_batch_count", std::size_t{16});
    }
    cfg.design_max_loss_db = j.value("design_max_loss_db", 3.0);
    cfg.threads = j.value("threads", 1u);
    cfg.canonical = j;
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const nlohmann::json& overrides = {}) {
    std::ifstream is(path);
    if (!is) fail_invalid("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_invalid("config parse error in " + path.string() + ": " + e.what());
    }
    if (overrides.is_object()) {
        j.merge_patch(overrides);
    }
    return parse_config(j);
}

namespace detail {

inline void write_csv_meta(std::ofstream& os, const ExperimentConfig& cfg) {
    os << "# config_hash=" << cfg.hash() << " tool_version=" << kToolVersion << "\n";
}

inline std::string fmt_db(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// losses: Fig.-1-style sweep, columns mismatch_mps, L_D_rect_db, L_D_hann_db, L_S_db.
inline std::filesystem::path run_losses(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "losses.csv";
    std::ofstream os(path);
    if (!os) fail_invalid("cannot open for writing: " + path.string());
    detail::write_csv_meta(os, cfg);
    os << "mismatch_mps,L_D_rect_db,L_D_hann_db,L_S_db\n";
    const double tp = cfg.grid.batch_duration_s();
    const double tint = cfg.cpi_config().integration_time_s();
    char line[160];
    const auto steps = static_cast<std::size_t>(
        std::floor(cfg.losses.span_mps / cfg.losses.step_mps + 0.5));
    for (std::size_t i = 0; i <= steps; ++i) {
        const double dv = static_cast<double>(i) * cfg.losses.step_mps;
        LossQuery rect(dv, cfg.radar, tp, tint, WindowKind::Rectangular);
        LossQuery hann(dv, cfg.radar, tp, tint, WindowKind::Hann);
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f\n", dv,
                      doppler_loss_rect(rect), doppler_loss_window(hann),
                      stretch_loss(rect));
        os << line;
    }
    return path;
}

// design-grid: hypothesis spacings at the configured loss threshold.
inline std::filesystem::path run_design_grid(const ExperimentConfig& cfg,
                                             const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const double tp = cfg.grid.batch_duration_s();
    const double tint = cfg.cpi_config().integration_time_s();
    LossQuery q(0.0, cfg.radar, tp, tint, cfg.window);
    const double dv_stretch = required_spacing(cfg.design_max_loss_db,
                                               CompensationMode::Stretch, q);
    const double dv_doppler = required_spacing(cfg.design_max_loss_db,
                                               CompensationMode::Doppler, q);
    nlohmann::json j = cfg.meta();
    j["max_loss_db"] = cfg.design_max_loss_db;
    j["window"] = window_name(cfg.window);
    j["stretch_spacing_mps"] = dv_stretch;
    j["doppler_spacing_mps"] = dv_doppler;
    j["batch_duration_s"] = tp;
    j["integration_time_s"] = tint;
    j["max_coherent_time_s_at_10mps"] = max_coherent_time(cfg.radar, 10.0);
    const auto path = out_dir / "design_grid.json";
    std::ofstream os(path);
    os << j.dump(2) << "\n";
    return path;
}

// simulate: reference waveform plus synthesized echo, binary + sidecars.
inline void run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    if (cfg.scene_file.empty()) fail_invalid("simulate: config has no scene_file");
    const Scene scene = load_scene(cfg.scene_file);

    WaveformSpec spec(cfg.seed, cfg.total_samples, cfg.radar, cfg.rms_level);
    NoiseWaveform gen(spec);
    const IQBuffer x = gen.generate(cfg.threads);

    IQSidecar xmeta;
    xmeta.sample_rate_hz = cfg.radar.sample_rate_hz;
    xmeta.length = cfg.total_samples;
    xmeta.seed = cfg.seed;
    xmeta.bandwidth_hz = cfg.radar.bandwidth_hz;
    xmeta.extra = cfg.meta();
    write_iq(out_dir / "reference.f32", x, xmeta);

    BatchGrid sim_grid(cfg.total_samples / cfg.grid.batch_len, cfg.grid.batch_len,
                       cfg.radar.sample_rate_hz);
    const IQBuffer y = synthesize_echo(gen, scene, cfg.radar, sim_grid, cfg.threads);
    IQSidecar ymeta = xmeta;
    ymeta.seed = scene.noise_seed;
    write_iq(out_dir / "received.f32", y, ymeta);
}

struct ModePlan {
    std::string label;
    VelocityHypothesis hypothesis;
    bool resampled_reference = false;
};

inline std::vector<ModePlan> plan_modes(const ExperimentConfig& cfg) {
    std::vector<ModePlan> plan;
    if (cfg.hypotheses) {
        std::size_t i = 0;
        for (const auto& h : *cfg.hypotheses) {
            char label[32];
            std::snprintf(label, sizeof(label), "h%03zu", i++);
            plan.push_back({label, h, false});
        }
        return plan;
    }
    if (cfg.auto_grid) {
        LossQuery q(0.0, cfg.radar, cfg.grid.batch_duration_s(),
                    cfg.cpi_config().integration_time_s(), cfg.window);
        const double spacing =
            required_spacing(cfg.auto_grid->max_loss_db, CompensationMode::Stretch, q);
        const auto grid = GridSpec::from(spacing, cfg.auto_grid->span_mps);
        std::size_t i = 0;
        for (double v : grid.velocities()) {
            char label[32];
            std::snprintf(label, sizeof(label), "g%03zu", i++);
            plan.push_back({label, {v, true, true}, false});
        }
        return plan;
    }
    const double vr = cfg.reference_velocity_mps;
    for (const auto& m : cfg.modes) {
        if (m == "none") plan.push_back({m, {0.0, false, false}, false});
        if (m == "doppler") plan.push_back({m, {vr, true, false}, false});
        if (m == "stretch") plan.push_back({m, {vr, false, true}, false});
        if (m == "both") plan.push_back({m, {vr, true, true}, false});
        if (m == "resample") plan.push_back({m, {vr, true, false}, true});
    }
    return plan;
}

// Streams resampled reference batches straight from the generator (exact
// continuation past CPI edges) and received batches from file.
class ResampledBatchSource final : public BatchSource {
public:
    ResampledBatchSource(const NoiseWaveform& gen, double v_r,
                         const std::filesystem::path& y_path, std::size_t batch_len,
                         std::size_t batch_offset, MemoryMeter* meter = nullptr)
        : gen_(gen), v_r_(v_r), file_(y_path, y_path, meter), batch_len_(batch_len),
          batch_offset_(batch_offset) {}

    void fill(std::size_t batch, std::span<cplx> x, std::span<cplx> y) override {
        // y side: reuse the file reader; x side of the reader is scratch.
        file_.fill(batch + batch_offset_, x, y);
        const std::size_t cpi_start = batch_offset_ * batch_len_;
        const IQBuffer chunk = resample_reference_chunk(
            gen_, cpi_start, batch * batch_len_, batch_len_, v_r_);
        std::copy_n(chunk.samples.begin(), batch_len_, x.begin());
    }

    static IQBuffer resample_reference_chunk(const NoiseWaveform& gen, std::size_t cpi_start,
                                             std::size_t local_start, std::size_t count,
                                             double v_r);

private:
    const NoiseWaveform& gen_;
    double v_r_;
    FileBatchSource file_;
    std::size_t batch_len_;
    std::size_t batch_offset_;
};

inline IQBuffer ResampledBatchSource::resample_reference_chunk(
    const NoiseWaveform& gen, std::size_t cpi_start, std::size_t local_start,
    std::size_t count, double v_r) {
    const auto& interp = SincInterpolator::instance();
    const RadarParams& radar = gen.spec().radar;
    const double scale = 1.0 + 2.0 * v_r / radar.wave_speed_mps;
    IQBuffer out;
    out.sample_rate_hz = radar.sample_rate_hz;
    out.samples.resize(count);
    const auto lo = static_cast<std::int64_t>(cpi_start) +
                    static_cast<std::int64_t>(
                        std::floor(static_cast<double>(local_start) * scale)) -
                    SincInterpolator::kHalf - 1;
    const auto hi = static_cast<std::int64_t>(cpi_start) +
                    static_cast<std::int64_t>(
                        std::ceil(static_cast<double>(local_start + count) * scale)) +
                    SincInterpolator::kHalf + 2;
    std::vector<cplx> slab(static_cast<std::size_t>(hi - lo));
    gen.fill(lo, slab);
    const auto base = static_cast<std::int64_t>(cpi_start);
    auto at = [&](std::int64_t i) { return slab[static_cast<std::size_t>(i + base - lo)]; };
    for (std::size_t i = 0; i < count; ++i) {
        out.samples[i] = interp.value(at, static_cast<double>(local_start + i) * scale);
    }
    return out;
}

// process: one range-Doppler map, SINR report and CSV per mode per CPI, plus
// a summary table (modes x CPIs).
inline void run_process(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto ref_path = out_dir / "reference.f32";
    const auto recv_path = out_dir / "received.f32";
    IQSidecar ref_meta;
    IQSidecar recv_meta;
    {
        std::ifstream probe(ref_path);
        if (!probe) fail_invalid("process: missing " + ref_path.string() + " (run simulate first)");
    }
    {
        std::ifstream is(ref_path.string() + ".json");
        nlohmann::json j;
        is >> j;
        ref_meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        ref_meta.length = j.at("length").get<std::uint64_t>();
        ref_meta.seed = j.value("seed", std::uint64_t{0});
        ref_meta.bandwidth_hz = j.value("bandwidth_hz", 0.0);
    }
    const std::size_t needed = cfg.cpi_count * cfg.grid.total_samples();
    if (ref_meta.length < needed) {
        fail_invalid("process: files hold " + std::to_string(ref_meta.length) +
                     " samples, config needs " + std::to_string(needed));
    }
    if (ref_meta.sample_rate_hz != cfg.radar.sample_rate_hz) {
        fail_invalid("process: file sample rate disagrees with config");
    }

    const auto plan = plan_modes(cfg);
    const CPIConfig cpi_cfg = cfg.cpi_config();

    std::optional<NoiseWaveform> gen;
    for (const auto& mp : plan) {
        if (mp.resampled_reference) {
            gen.emplace(WaveformSpec(cfg.seed, cfg.total_samples, cfg.radar, cfg.rms_level));
            break;
        }
    }

    // summary rows keyed by plan order
    std::vector<std::vector<double>> sinr_table(plan.size(),
                                                std::vector<double>(cfg.cpi_count, 0.0));

    for (std::size_t cpi = 0; cpi < cfg.cpi_count; ++cpi) {
        const std::size_t batch_offset = cpi * cfg.grid.batch_count;

        std::vector<std::size_t> direct_rows;
        std::vector<VelocityHypothesis> direct_hyps;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            if (!plan[i].resampled_reference) {
                direct_rows.push_back(i);
                direct_hyps.push_back(plan[i].hypothesis);
            }
        }

        std::vector<RangeDopplerMap> maps;
        std::vector<std::size_t> map_rows;
        if (!direct_hyps.empty()) {
            FileBatchSource src(ref_path, recv_path, nullptr);
            OffsetBatchSource osrc(src, batch_offset);
            auto got = process_cpi(osrc, direct_hyps, cpi_cfg,
                                   ProcessOptions{cfg.threads, nullptr});
            for (std::size_t i = 0; i < got.size(); ++i) {
                got[i].label = plan[direct_rows[i]].label;
                maps.push_back(std::move(got[i]));
                map_rows.push_back(direct_rows[i]);
            }
        }
        for (std::size_t i = 0; i < plan.size(); ++i) {
            if (!plan[i].resampled_reference) continue;
            ResampledBatchSource src(*gen, plan[i].hypothesis.reference_velocity_mps,
                                     recv_path, cfg.grid.batch_len, batch_offset, nullptr);
            const VelocityHypothesis hyp[] = {plan[i].hypothesis};
            auto got = process_cpi(src, hyp, cpi_cfg, ProcessOptions{cfg.threads, nullptr});
            got[0].label = plan[i].label;
            maps.push_back(std::move(got[0]));
            map_rows.push_back(i);
        }

        for (std::size_t i = 0; i < maps.size(); ++i) {
            const auto& map = maps[i];
            const std::string tag = map.label + "_cpi" + std::to_string(cpi + 1);
            write_map(out_dir / ("map_" + tag + ".f32"), map, cfg.meta());
            write_map_csv(out_dir / ("map_" + tag + ".csv"), map);
            const auto rep = measure_sinr(map);
            nlohmann::json j = rep.to_json();
            j.update(cfg.meta());
            j["mode"] = map.label;
            j["cpi"] = cpi + 1;
            std::ofstream os(out_dir / ("sinr_" + tag + ".json"));
            os << j.dump(2) << "\n";
            sinr_table[map_rows[i]][cpi] = rep.sinr_db;
        }
    }

    const auto summary = out_dir / "summary.csv";
    std::ofstream os(summary);
    detail::write_csv_meta(os, cfg);
    os << "mode";
    for (std::size_t cpi = 1; cpi <= cfg.cpi_count; ++cpi) os << ",cpi_" << cpi;
    os << "\n";
    for (std::size_t i = 0; i < plan.size(); ++i) {
        os << plan[i].label;
        for (std::size_t cpi = 0; cpi < cfg.cpi_count; ++cpi) {
            os << "," << detail::fmt_db(sinr_table[i][cpi]);
        }
        os << "\n";
    }
}

// gain-curve: one SINR-vs-integration-time curve per start time.
inline std::filesystem::path run_gain_curve(const ExperimentConfig& cfg,
                                            const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const IQBuffer x = read_iq(out_dir / "reference.f32");
    const IQBuffer y = read_iq(out_dir / "received.f32");

    VelocityHypothesis hyp{cfg.reference_velocity_mps, true, true};
    if (cfg.gain.mode == "none") hyp = {0.0, false, false};
    else if (cfg.gain.mode == "doppler") hyp = {cfg.reference_velocity_mps, true, false};
    else if (cfg.gain.mode == "stretch") hyp = {cfg.reference_velocity_mps, false, true};
    else if (cfg.gain.mode == "both") hyp = {cfg.reference_velocity_mps, true, true};
    else fail_invalid("gain-curve: unsupported mode " + cfg.gain.mode);

    CPIConfig base(cfg.radar, BatchGrid(cfg.gain.base_batch_count, cfg.grid.batch_len,
                                        cfg.radar.sample_rate_hz), cfg.window);
    const auto path = out_dir / "gain_curve.csv";
    std::ofstream os(path);
    detail::write_csv_meta(os, cfg);
    os << "start_time_s,integration_time_ms,sinr_db,gain_db\n";
    char line[160];
    for (double start : cfg.gain.start_times_s) {
        const auto curve = gain_vs_integration_time(y, x, base, hyp, start,
                                                    cfg.gain.doublings, {}, cfg.threads);
        for (const auto& p : curve.points) {
            std::snprintf(line, sizeof(line), "%.6f,%.6f,%s,%s\n", start,
                          p.integration_time_s * 1e3, detail::fmt_db(p.sinr_db).c_str(),
                          detail::fmt_db(p.sinr_increase_db).c_str());
            os << line;
        }
    }
    return path;
}

}  // namespace nrad
