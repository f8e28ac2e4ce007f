#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrad/common.hpp"
#include "nrad/fft.hpp"
#include "nrad/iq.hpp"
#include "nrad/model.hpp"
#include "nrad/parallel.hpp"
#include "nrad/rng.hpp"
#include "nrad/waveform.hpp"

namespace nrad {

// Point scatterer. Positive radial velocity closes on the radar: the delay
// tau(t) = 2(R0 - v t - a t^2 / 2)/c shrinks and the echo carries positive
// Doppler. Acceleration is simulated but never hypothesis-searched.
struct PointTarget {
    double initial_range_m = 0.0;
    double radial_velocity_mps = 0.0;
    double radial_acceleration_mps2 = 0.0;
    cplx amplitude{1.0, 0.0};

    double delay_s(double t, double wave_speed) const {
        return 2.0 *
               (initial_range_m - radial_velocity_mps * t -
                0.5 * radial_acceleration_mps2 * t * t) /
               wave_speed;
    }
};

struct Scene {
    std::vector<PointTarget> targets;
    std::vector<PointTarget> clutter;  // zero velocity; includes the direct path
    double noise_power = 0.0;          // complex noise variance
    std::uint64_t noise_seed = 0;
};

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene scene;
    auto parse_target = [](const nlohmann::json& t, const char* kind, std::size_t idx) {
        PointTarget out;
        if (!t.contains("range_m")) {
            fail_invalid(std::string("scene: ") + kind + "[" + std::to_string(idx) +
                         "] missing field range_m");
        }
        out.initial_range_m = t.at("range_m").get<double>();
        out.radial_velocity_mps = t.value("velocity_mps", 0.0);
        out.radial_acceleration_mps2 = t.value("acceleration_mps2", 0.0);
        if (t.contains("amplitude")) {
            const auto& a = t.at("amplitude");
            out.amplitude = {a.at(0).get<double>(), a.at(1).get<double>()};
        }
        return out;
    };
    if (j.contains("targets")) {
        std::size_t i = 0;
        for (const auto& t : j.at("targets")) scene.targets.push_back(parse_target(t, "targets", i++));
    }
    if (j.contains("clutter")) {
        std::size_t i = 0;
        for (const auto& t : j.at("clutter")) {
            auto parsed = parse_target(t, "clutter", i);
            if (parsed.radial_velocity_mps != 0.0 || parsed.radial_acceleration_mps2 != 0.0) {
                fail_invalid("scene: clutter[" + std::to_string(i) + "] must be static");
            }
            scene.clutter.push_back(parsed);
            ++i;
        }
    }
    scene.noise_power = j.value("noise_power", 0.0);
    if (scene.noise_power < 0.0) fail_invalid("scene: noise_power must be >= 0");
    scene.noise_seed = j.value("noise_seed", std::uint64_t{0});
    return scene;
}

inline Scene load_scene(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail_invalid("cannot open scene file: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_invalid("scene parse error in " + path.string() + ": " + e.what());
    }
    return scene_from_json(j);
}

inline nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json j;
    auto dump_target = [](const PointTarget& t) {
        nlohmann::json o;
        o["range_m"] = t.initial_range_m;
        o["velocity_mps"] = t.radial_velocity_mps;
        o["acceleration_mps2"] = t.radial_acceleration_mps2;
        o["amplitude"] = {t.amplitude.real(), t.amplitude.imag()};
        return o;
    };
    j["targets"] = nlohmann::json::array();
    for (const auto& t : scene.targets) j["targets"].push_back(dump_target(t));
    j["clutter"] = nlohmann::json::array();
    for (const auto& t : scene.clutter) j["clutter"].push_back(dump_target(t));
    j["noise_power"] = scene.noise_power;
    j["noise_seed"] = scene.noise_seed;
    return j;
}

namespace detail {

// One scatterer's contribution over one batch: the waveform is delayed by
// the value of tau frozen at the batch center (integer part by indexing into
// the generator, fractional part by a frequency-domain phase ramp on a
// 2M window so wrap effects stay in the discarded guards), then the exact
// per-sample carrier phase is applied by the caller.
template <class FillFn>
void delayed_batch(FillFn&& fill_range, std::size_t batch, std::size_t batch_len,
                   double delay_samples, const Fft& fft2m, std::span<cplx> out) {
    const std::size_t m = batch_len;
    const std::size_t l = 2 * m;
    const double dint_f = std::floor(delay_samples);
    const auto dint = static_cast<std::int64_t>(dint_f);
    const double frac = delay_samples - dint_f;

    std::vector<cplx> seg(l);
    const std::int64_t base =
        static_cast<std::int64_t>(batch * m) - static_cast<std::int64_t>(m / 2) - dint;
    fill_range(base, std::span<cplx>(seg));
    fft2m.forward(seg);
    for (std::size_t k = 0; k < l; ++k) {
        const double fk = (k < l / 2) ? static_cast<double>(k)
                                      : static_cast<double>(k) - static_cast<double>(l);
        const double a = -kTwoPi * fk * frac / static_cast<double>(l);
        seg[k] *= cplx{std::cos(a), std::sin(a)};
    }
    fft2m.inverse(seg);
    for (std::size_t i = 0; i < m; ++i) out[i] = seg[m / 2 + i];
}

}  // namespace detail

// Received-signal synthesis. fill_range(start, out) must supply reference
// samples for indices somewhat before 0 and after n_samples (the generator's
// counter-based extension); targets are summed in list order, then clutter,
// then noise, so output is bit-reproducible for a fixed scene.
template <class FillFn>
IQBuffer synthesize_echo_from(FillFn&& fill_range, std::size_t n_samples, const Scene& scene,
                              const RadarParams& radar, const BatchGrid& grid,
                              unsigned threads = 1) {
    if (n_samples == 0) fail_invalid("synthesize_echo: empty reference");
    if (n_samples % grid.batch_len != 0) {
        fail_invalid("synthesize_echo: sample count not a multiple of batch length");
    }
    const std::size_t batches = n_samples / grid.batch_len;
    const double fs = radar.sample_rate_hz;
    const double t_end = static_cast<double>(n_samples) / fs;

    auto check_target = [&](const PointTarget& t, const char* kind, std::size_t idx) {
        for (double at : {0.0, t_end / 2.0, t_end}) {
            const double tau = t.delay_s(at, radar.wave_speed_mps);
            if (!(tau >= 0.0) || !(tau < t_end)) {
                fail_invalid(std::string("synthesize_echo: ") + kind + "[" +
                             std::to_string(idx) + "] delay " + std::to_string(tau) +
                             " s outside [0, CPI) at t=" + std::to_string(at));
            }
        }
    };
    for (std::size_t i = 0; i < scene.targets.size(); ++i) check_target(scene.targets[i], "targets", i);
    for (std::size_t i = 0; i < scene.clutter.size(); ++i) check_target(scene.clutter[i], "clutter", i);

    IQBuffer out;
    out.sample_rate_hz = fs;
    out.samples.assign(n_samples, cplx{0.0, 0.0});

    const Fft fft2m(2 * grid.batch_len);
    const double tp = grid.batch_duration_s();

    auto add_scatterer = [&](const PointTarget& t) {
        parallel_for(0, batches, threads, [&](std::size_t p) {
            const std::size_t m = grid.batch_len;
            std::vector<cplx> env(m);
            const double t_center = (static_cast<double>(p) + 0.5) * tp;
            const double delay = t.delay_s(t_center, radar.wave_speed_mps) * fs;
            detail::delayed_batch(fill_range, p, m, delay, fft2m, env);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t n = p * m + i;
                const double tau = t.delay_s(static_cast<double>(n) / fs, radar.wave_speed_mps);
                const double ph = -kTwoPi * radar.carrier_freq_hz * tau;
                out.samples[n] += t.amplitude * env[i] * cplx{std::cos(ph), std::sin(ph)};
            }
        });
    };
    for (const auto& t : scene.targets) add_scatterer(t);
    for (const auto& t : scene.clutter) add_scatterer(t);

    if (scene.noise_power > 0.0) {
        const double sigma = std::sqrt(scene.noise_power);
        parallel_for(0, batches, threads, [&](std::size_t p) {
            const std::size_t m = grid.batch_len;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t n = p * m + i;
                out.samples[n] += sigma * gaussian_sample(scene.noise_seed,
                                                          static_cast<std::int64_t>(n),
                                                          rng_domain::kSceneNoise);
            }
        });
    }
    return out;
}

inline IQBuffer synthesize_echo(const NoiseWaveform& reference, const Scene& scene,
                                const RadarParams& radar, const BatchGrid& grid,
                                unsigned threads = 1) {
    return synthesize_echo_from(
        [&](std::int64_t start, std::span<cplx> out) { reference.fill(start, out); },
        reference.spec().length, scene, radar, grid, threads);
}

// Noise variance giving a predicted post-processing SINR of sinr_db when the
// processing chain contributes gain_db: sigma^2 = peak * 10^((G - S)/10).
inline double noise_power_for_sinr(double target_peak_power, double sinr_db,
                                   double processing_gain_db) {
    if (!(target_peak_power > 0.0)) {
        fail_invalid("noise_power_for_sinr: target_peak_power must be positive");
    }
    return target_peak_power * from_db(processing_gain_db - sinr_db);
}

inline IQBuffer add_noise_to_sinr(const IQBuffer& y_clean, double target_peak_power,
                                  double desired_post_integration_sinr_db,
                                  double processing_gain_db, std::uint64_t seed) {
    const double var = noise_power_for_sinr(target_peak_power,
                                            desired_post_integration_sinr_db,
                                            processing_gain_db);
    IQBuffer out = y_clean;
    const double sigma = std::sqrt(var);
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        out.samples[n] += sigma * gaussian_sample(seed, static_cast<std::int64_t>(n),
                                                  rng_domain::kSceneNoise);
    }
    return out;
}

}  // namespace nrad
