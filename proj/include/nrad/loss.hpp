#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nrad/common.hpp"
#include "nrad/model.hpp"

namespace nrad {

struct LossQuery {
    double velocity_mismatch_mps = 0.0;  // v_s - v_r
    RadarParams radar;
    double batch_duration_s = 0.0;   // t_p
    double integration_time_s = 0.0;  // T_int
    WindowKind window = WindowKind::Rectangular;

    LossQuery(double mismatch, RadarParams r, double tp, double t_int,
              WindowKind w = WindowKind::Rectangular)
        : velocity_mismatch_mps(mismatch), radar(r), batch_duration_s(tp),
          integration_time_s(t_int), window(w) {
        if (!(tp > 0.0) || !(t_int > 0.0)) {
            fail_invalid("LossQuery: durations must be positive");
        }
        if (tp > t_int) fail_invalid("LossQuery: batch duration exceeds integration time");
    }
};

// Rectangular-window Doppler loss, 10*log10(|sin(u)/u|^-2) with
// u = 2 pi f_c dv t_p / c. Returns kUnbounded at the nulls.
inline double doppler_loss_rect(const LossQuery& q) {
    const double u = kTwoPi * q.radar.carrier_freq_hz * std::abs(q.velocity_mismatch_mps) *
                     q.batch_duration_s / q.radar.wave_speed_mps;
    if (u == 0.0) return 0.0;
    const double s = std::sin(u) / u;
    if (s == 0.0) return kUnbounded;
    return -20.0 * std::log10(std::abs(s));
}

// Window-generic Doppler loss |W(f_d)/W(0)|^-2 with W the transform of the
// sampled window. Evaluated by direct summation at the exact f_d (the limit
// of an infinitely zero-padded DFT); 4096 window samples keep the discrete
// sum within 0.01 dB of the continuous transform for our batch lengths.
inline double doppler_loss_window(const LossQuery& q) {
    constexpr std::size_t kSamples = 4096;
    const double fd = 2.0 * q.radar.carrier_freq_hz * std::abs(q.velocity_mismatch_mps) /
                      q.radar.wave_speed_mps;
    const auto w = make_window(q.window, kSamples);
    const double dt = q.batch_duration_s / static_cast<double>(kSamples);
    cplx acc{0.0, 0.0};
    double dc = 0.0;
    for (std::size_t m = 0; m < kSamples; ++m) {
        const double a = -kTwoPi * fd * static_cast<double>(m) * dt;
        acc += w[m] * cplx{std::cos(a), std::sin(a)};
        dc += w[m];
    }
    const double mag = std::abs(acc) / dc;
    if (mag == 0.0) return kUnbounded;
    const double db = -20.0 * std::log10(mag);
    return db == 0.0 ? 0.0 : db;  // avoid -0.0 at zero mismatch
}

// Cell-migration loss 4 dv^2 T^2 fs B / c^2, clamped at 0 dB where the
// linear value drops below one (the flat segment of the published curve).
inline double stretch_loss(const LossQuery& q) {
    const double dv = q.velocity_mismatch_mps;
    const double lin = 4.0 * dv * dv * q.integration_time_s * q.integration_time_s *
                       q.radar.sample_rate_hz * q.radar.bandwidth_hz /
                       (q.radar.wave_speed_mps * q.radar.wave_speed_mps);
    if (lin <= 1.0) return 0.0;
    return 10.0 * std::log10(lin);
}

enum class CompensationMode { Doppler, Stretch };

// Hypothesis-grid spacing for a maximum allowable loss.
//
// Stretch follows the paper's dv convention (spacing equals the mismatch at
// which Eq.-style loss hits the threshold, closed form). Doppler follows the
// delta-v convention (hypotheses spaced delta-v put the worst case at
// delta-v/2, so the returned spacing is twice the bisected mismatch).
inline double required_spacing(double max_loss_db, CompensationMode mode,
                               const LossQuery& q) {
    if (!(max_loss_db > 0.0) || !std::isfinite(max_loss_db)) {
        fail_invalid("required_spacing: max_loss_db must be positive and finite");
    }
    if (mode == CompensationMode::Stretch) {
        const double lin = from_db(max_loss_db);
        return q.radar.wave_speed_mps / (2.0 * q.integration_time_s) *
               std::sqrt(lin / (q.radar.sample_rate_hz * q.radar.bandwidth_hz));
    }
    // Bisection over the window mainlobe, where the loss rises monotonically
    // from 0 through the threshold. The bracket walks outward in steps of
    // 1/64th of the rectangular first-null velocity so the null cannot be
    // jumped over.
    auto loss_at = [&](double dv) {
        LossQuery probe = q;
        probe.velocity_mismatch_mps = dv;
        return doppler_loss_window(probe);
    };
    const double step = q.radar.wave_speed_mps /
                        (2.0 * q.radar.carrier_freq_hz * q.batch_duration_s) / 64.0;
    double lo = 0.0;
    double hi = step;
    int steps = 0;
    while (loss_at(hi) < max_loss_db) {
        lo = hi;
        hi += step;
        if (++steps > 4096) {
            fail_invalid("required_spacing: threshold unreachable within the mainlobe");
        }
    }
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        (loss_at(mid) < max_loss_db ? lo : hi) = mid;
    }
    const double worst_case_mismatch = 0.5 * (lo + hi);
    return 2.0 * worst_case_mismatch;
}

// Migration-limited coherent integration time c/(2 B |v|).
inline double max_coherent_time(const RadarParams& radar, double v) {
    if (v == 0.0) return kUnbounded;
    return range_resolution(radar) / std::abs(v);
}

// Processing SNR penalty of a window: 10*log10( (sum w)^2 / (M sum w^2) )^-1.
inline double window_snr_penalty(WindowKind kind, std::size_t len = 4096) {
    const auto w = make_window(kind, len);
    double s1 = 0.0;
    double s2 = 0.0;
    for (double v : w) {
        s1 += v;
        s2 += v * v;
    }
    const double gain = s1 * s1 / (static_cast<double>(len) * s2);
    return -10.0 * std::log10(gain);
}

inline double hann_snr_penalty() { return window_snr_penalty(WindowKind::Hann); }

// Symmetric velocity-hypothesis grid about zero.
struct GridSpec {
    double spacing_mps = 0.0;
    double span_mps = 0.0;
    std::size_t hypothesis_count = 0;

    static GridSpec from(double spacing, double span) {
        if (!(spacing > 0.0) || span < 0.0) {
            fail_invalid("GridSpec: spacing must be positive, span non-negative");
        }
        GridSpec g;
        g.spacing_mps = spacing;
        g.span_mps = span;
        g.hypothesis_count =
            static_cast<std::size_t>(std::floor(2.0 * span / spacing)) + 1;
        return g;
    }

    std::vector<double> velocities() const {
        std::vector<double> v(hypothesis_count);
        const double half = static_cast<double>(hypothesis_count - 1) / 2.0;
        for (std::size_t i = 0; i < hypothesis_count; ++i) {
            v[i] = (static_cast<double>(i) - half) * spacing_mps;
        }
        return v;
    }
};

}  // namespace nrad
