#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "nrad/common.hpp"
#include "nrad/fft.hpp"
#include "nrad/iq.hpp"
#include "nrad/model.hpp"
#include "nrad/parallel.hpp"
#include "nrad/rng.hpp"

namespace nrad {

struct WaveformSpec {
    std::uint64_t seed = 0;
    std::size_t length = 0;
    RadarParams radar;
    double rms_level = 1.0;

    WaveformSpec(std::uint64_t seed_, std::size_t length_, RadarParams radar_,
                 double rms = 1.0)
        : seed(seed_), length(length_), radar(radar_), rms_level(rms) {
        if (length_ < 16) fail_invalid("WaveformSpec: length must be >= 16");
        if (!(rms > 0.0)) fail_invalid("WaveformSpec: rms_level must be positive");
    }
};

// Band-limiting kernel: inverse transform of a raised-cosine lowpass mask
// (flat to B/2 - w, cosine-squared roll-off of width w = 2% of B ending at
// B/2), Kaiser-windowed to finite length, normalized to unit energy so a
// unit-variance white input keeps unit variance. B == fs degenerates to the
// identity kernel.
inline std::vector<double> bandlimit_kernel(double bandwidth_hz, double sample_rate_hz) {
    const double occupancy = bandwidth_hz / sample_rate_hz;
    if (occupancy >= 1.0 - 1e-12) return {1.0};

    const double roll = 0.02 * occupancy;           // normalized roll-off width
    const std::size_t grid = 16384;                 // design grid
    std::vector<cplx> h(grid, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < grid; ++k) {
        double f = static_cast<double>(k) / static_cast<double>(grid);
        if (f >= 0.5) f -= 1.0;                     // signed normalized frequency
        const double af = std::abs(f);
        const double flat_edge = occupancy / 2.0 - roll;
        double gain = 0.0;
        if (af <= flat_edge) {
            gain = 1.0;
        } else if (af <= occupancy / 2.0) {
            const double t = (af - flat_edge) / roll;
            const double cs = std::cos(0.5 * kPi * t);
            gain = cs * cs;
        }
        h[k] = {gain, 0.0};
    }
    Fft fft(grid);
    fft.inverse(h);

    // Half-width: ~4 / transition-width taps each side, clamped.
    const std::size_t half = std::min<std::size_t>(
        2048, std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(4.0 / roll))));
    const double beta = 10.0;
    const double i0b = std::cyl_bessel_i(0.0, beta);
    std::vector<double> taps(2 * half + 1);
    for (std::size_t j = 0; j < taps.size(); ++j) {
        const auto offset = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(half);
        const std::size_t src = (offset >= 0)
            ? static_cast<std::size_t>(offset)
            : grid - static_cast<std::size_t>(-offset);
        const double x = static_cast<double>(offset) / static_cast<double>(half + 1);
        const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / i0b;
        taps[j] = h[src].real() * kaiser;
    }
    double energy = 0.0;
    for (double t : taps) energy += t * t;
    const double scale = 1.0 / std::sqrt(energy);
    for (double& t : taps) t *= scale;
    return taps;
}

// Deterministic band-limited pseudorandom noise. Sample n (any n, including
// negative) is the Philox4x32-10 white stream convolved with the fixed
// kernel, so disjoint ranges generate in parallel to the same bits and the
// scene simulator can extend the waveform past the CPI edges.
class NoiseWaveform {
public:
    explicit NoiseWaveform(WaveformSpec spec)
        : spec_(spec),
          kernel_(bandlimit_kernel(spec.radar.bandwidth_hz, spec.radar.sample_rate_hz)) {}

    const WaveformSpec& spec() const { return spec_; }
    std::size_t kernel_len() const { return kernel_.size(); }

    cplx sample(std::int64_t n) const {
        const auto half = static_cast<std::int64_t>(kernel_.size() / 2);
        cplx acc{0.0, 0.0};
        for (std::size_t j = 0; j < kernel_.size(); ++j) {
            const std::int64_t src = n - half + static_cast<std::int64_t>(j);
            acc += kernel_[kernel_.size() - 1 - j] *
                   gaussian_sample(spec_.seed, src, rng_domain::kWaveform);
        }
        return acc * spec_.rms_level;
    }

    // Bulk fill of [start, start+out.size()); bit-identical to sample().
    void fill(std::int64_t start, std::span<cplx> out) const {
        const auto half = static_cast<std::int64_t>(kernel_.size() / 2);
        const std::size_t klen = kernel_.size();
        std::vector<cplx> white(out.size() + klen - 1);
        for (std::size_t i = 0; i < white.size(); ++i) {
            white[i] = gaussian_sample(spec_.seed,
                                       start - half + static_cast<std::int64_t>(i),
                                       rng_domain::kWaveform);
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            cplx acc{0.0, 0.0};
            for (std::size_t j = 0; j < klen; ++j) {
                acc += kernel_[klen - 1 - j] * white[i + j];
            }
            out[i] = acc * spec_.rms_level;
        }
    }

    IQBuffer generate(unsigned threads = 1) const {
        IQBuffer buf;
        buf.sample_rate_hz = spec_.radar.sample_rate_hz;
        buf.samples.resize(spec_.length);
        const std::size_t chunk = 1 << 16;
        const std::size_t chunks = (spec_.length + chunk - 1) / chunk;
        parallel_for(0, chunks, threads, [&](std::size_t ci) {
            const std::size_t lo = ci * chunk;
            const std::size_t hi = std::min(spec_.length, lo + chunk);
            fill(static_cast<std::int64_t>(lo),
                 std::span<cplx>(buf.samples.data() + lo, hi - lo));
        });
        return buf;
    }

private:
    WaveformSpec spec_;
    std::vector<double> kernel_;
};

inline IQBuffer generate_noise(const WaveformSpec& spec, unsigned threads = 1) {
    return NoiseWaveform(spec).generate(threads);
}

// 10*log10(|R[0]|^2 / max_{0<k<=max_lag} |R[k]|^2) with R the signal's own
// lagged correlation. Returns kUnbounded when every sidelobe is exactly zero.
inline double autocorrelation_peak_to_sidelobe(const IQBuffer& x, std::size_t max_lag) {
    if (x.samples.empty()) fail_invalid("autocorrelation_peak_to_sidelobe: empty buffer");
    if (max_lag >= x.size() / 2) {
        fail_invalid("autocorrelation_peak_to_sidelobe: max_lag must be < length/2");
    }
    const auto n = x.size();
    double peak = 0.0;
    for (const auto& s : x.samples) peak += std::norm(s);
    double worst = 0.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t i = k; i < n; ++i) {
            acc += x.samples[i] * std::conj(x.samples[i - k]);
        }
        worst = std::max(worst, std::norm(acc));
    }
    if (worst == 0.0) return kUnbounded;
    return 10.0 * std::log10(peak * peak / worst);
}

}  // namespace nrad
