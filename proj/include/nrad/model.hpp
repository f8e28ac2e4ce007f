#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nrad/common.hpp"

namespace nrad {

// Physical constants every equation consumes. Immutable after construction.
struct RadarParams {
    double carrier_freq_hz;
    double sample_rate_hz;
    double bandwidth_hz;
    double wave_speed_mps;

    RadarParams(double carrier_freq, double sample_rate, double bandwidth,
                double wave_speed = kSpeedOfLightSI)
        : carrier_freq_hz(carrier_freq),
          sample_rate_hz(sample_rate),
          bandwidth_hz(bandwidth),
          wave_speed_mps(wave_speed) {
        if (!(carrier_freq > 0.0) || !(sample_rate > 0.0) || !(bandwidth > 0.0) ||
            !(wave_speed > 0.0)) {
            fail_invalid("RadarParams: all fields must be strictly positive");
        }
        if (bandwidth > sample_rate) {
            fail_invalid("RadarParams: bandwidth exceeds sample rate (complex baseband Nyquist)");
        }
    }
};

// Range resolution c/(2B).
inline double range_resolution(const RadarParams& radar) {
    return radar.wave_speed_mps / (2.0 * radar.bandwidth_hz);
}

// CPI segmentation: P batches of M samples.
struct BatchGrid {
    std::size_t batch_count;  // P
    std::size_t batch_len;    // M
    double sample_rate_hz;

    BatchGrid(std::size_t count, std::size_t len, double sample_rate)
        : batch_count(count), batch_len(len), sample_rate_hz(sample_rate) {
        if (count == 0 || len == 0) fail_invalid("BatchGrid: P and M must be positive");
        if (!(sample_rate > 0.0)) fail_invalid("BatchGrid: sample rate must be positive");
    }

    std::size_t total_samples() const { return batch_count * batch_len; }
    double batch_duration_s() const {
        return static_cast<double>(batch_len) / sample_rate_hz;
    }
};

enum class WindowKind { Rectangular, Hann };

inline std::string window_name(WindowKind k) {
    return k == WindowKind::Rectangular ? "rectangular" : "hann";
}

inline WindowKind window_from_name(const std::string& s) {
    if (s == "rectangular" || s == "rect") return WindowKind::Rectangular;
    if (s == "hann") return WindowKind::Hann;
    fail_invalid("unknown window kind: " + s);
}

// Symmetric Hann, denominator M-1. Rectangular is all ones.
inline std::vector<double> make_window(WindowKind kind, std::size_t len) {
    if (len < 2) fail_invalid("make_window: len must be >= 2");
    std::vector<double> w(len, 1.0);
    if (kind == WindowKind::Hann) {
        for (std::size_t m = 0; m < len; ++m) {
            w[m] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(m) /
                                         static_cast<double>(len - 1)));
        }
    }
    return w;
}

struct CPIConfig {
    RadarParams radar;
    BatchGrid grid;
    WindowKind window = WindowKind::Rectangular;

    CPIConfig(RadarParams r, BatchGrid g, WindowKind w = WindowKind::Rectangular)
        : radar(r), grid(g), window(w) {
        if (grid.sample_rate_hz != radar.sample_rate_hz) {
            fail_invalid("CPIConfig: grid and radar sample rates disagree");
        }
    }

    double integration_time_s() const {
        return static_cast<double>(grid.total_samples()) / radar.sample_rate_hz;
    }
};

// Bin <-> physical unit maps for a P x M range-Doppler map. Doppler bins in
// [0, P/2) are non-negative closing velocities, [P/2, P) negative, matching
// the FFT layout of the slow-time transform.
struct RangeDopplerAxes {
    std::size_t batch_count;
    std::size_t batch_len;
    double sample_rate_hz;
    double carrier_freq_hz;
    double wave_speed_mps;

    explicit RangeDopplerAxes(const CPIConfig& cfg)
        : batch_count(cfg.grid.batch_count),
          batch_len(cfg.grid.batch_len),
          sample_rate_hz(cfg.radar.sample_rate_hz),
          carrier_freq_hz(cfg.radar.carrier_freq_hz),
          wave_speed_mps(cfg.radar.wave_speed_mps) {}

    double range_m(std::size_t range_bin) const {
        return static_cast<double>(range_bin) * wave_speed_mps / (2.0 * sample_rate_hz);
    }

    std::size_t range_bin(double range_m_) const {
        return static_cast<std::size_t>(
            std::llround(range_m_ * 2.0 * sample_rate_hz / wave_speed_mps));
    }

    double integration_time_s() const {
        return static_cast<double>(batch_count * batch_len) / sample_rate_hz;
    }

    double doppler_freq_hz(std::size_t doppler_bin) const {
        const auto l = static_cast<double>(doppler_bin);
        const auto p = static_cast<double>(batch_count);
        const double signed_bin = (l < p / 2.0) ? l : l - p;
        return signed_bin / integration_time_s();
    }

    double velocity_mps(std::size_t doppler_bin) const {
        return doppler_freq_hz(doppler_bin) * wave_speed_mps / (2.0 * carrier_freq_hz);
    }

    std::size_t doppler_bin(double velocity_mps_) const {
        const double fd = 2.0 * velocity_mps_ * carrier_freq_hz / wave_speed_mps;
        const auto p = static_cast<long long>(batch_count);
        long long l = std::llround(fd * integration_time_s()) % p;
        if (l < 0) l += p;
        return static_cast<std::size_t>(l);
    }

    double doppler_bin_width_mps() const {
        return wave_speed_mps / (2.0 * carrier_freq_hz * integration_time_s());
    }
};

}  // namespace nrad
