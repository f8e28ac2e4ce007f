#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrad/common.hpp"
#include "nrad/fft.hpp"
#include "nrad/iq.hpp"
#include "nrad/memmeter.hpp"
#include "nrad/model.hpp"
#include "nrad/parallel.hpp"
#include "nrad/waveform.hpp"

namespace nrad {

// A reference velocity plus the compensations applied at it. Positive
// reference velocity tracks a closing target.
struct VelocityHypothesis {
    double reference_velocity_mps = 0.0;
    bool doppler = false;
    bool stretch = false;
};

inline cplx unit_phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Doppler modulation phase for global sample index n. The sign pairs with
// the scene convention (closing target -> positive echo Doppler), so the
// conjugation inside the correlation cancels the echo phase at v_r = v_s.
inline cplx doppler_phase(double v_r, const RadarParams& radar, std::int64_t n) {
    const double fd = 2.0 * v_r * radar.carrier_freq_hz / radar.wave_speed_mps;
    return unit_phase(kTwoPi * fd * (static_cast<double>(n) / radar.sample_rate_hz));
}

// Slow-time-progressive fractional delay factor for batch p, DFT bin q.
// Bin frequencies are signed; the literal unsigned q of the printed form
// would mis-shift the negative-frequency half of a complex baseband signal.
inline cplx stretch_phase_factor(double v_r, const RadarParams& radar, std::size_t p,
                                 std::size_t q, std::size_t batch_len) {
    const double kq = (q < batch_len / 2)
        ? static_cast<double>(q)
        : static_cast<double>(q) - static_cast<double>(batch_len);
    const double a = kTwoPi * kq * static_cast<double>(p) * 2.0 * v_r /
                     radar.wave_speed_mps;
    return unit_phase(a);
}

enum class SpectraKind { Reference, Received };

// Per-batch spectra, row p = DFT of batch p. Reference rows carry the 1/M
// factor; received rows are unnormalized, so the correlation row recovered
// by the unscaled inverse transform is exactly sum_n y[n] x*[(n-m) mod M].
struct BatchSpectra {
    std::size_t batch_count = 0;
    std::size_t batch_len = 0;
    SpectraKind kind = SpectraKind::Reference;
    std::vector<cplx> rows;  // row-major P x M

    std::span<cplx> row(std::size_t p) {
        return {rows.data() + p * batch_len, batch_len};
    }
    std::span<const cplx> row(std::size_t p) const {
        return {rows.data() + p * batch_len, batch_len};
    }
};

struct RangeDopplerMap {
    std::size_t doppler_bins = 0;  // P
    std::size_t range_bins = 0;    // M
    std::vector<double> power;     // |R|^2, row-major P x M
    VelocityHypothesis hypothesis;
    CPIConfig config;
    std::string label;

    RangeDopplerMap(const CPIConfig& cfg, VelocityHypothesis hyp)
        : doppler_bins(cfg.grid.batch_count),
          range_bins(cfg.grid.batch_len),
          power(cfg.grid.total_samples(), 0.0),
          hypothesis(hyp),
          config(cfg) {}

    double at(std::size_t l, std::size_t m) const { return power[l * range_bins + m]; }
    double& at(std::size_t l, std::size_t m) { return power[l * range_bins + m]; }
    RangeDopplerAxes axes() const { return RangeDopplerAxes(config); }
};

// Brute-force matched filter R[k] = sum_n y[n] x*[n-k]; the testing oracle
// for the frequency-domain path. O(N * max_lag).
inline std::vector<cplx> correlate_direct(const IQBuffer& y, const IQBuffer& x,
                                          std::size_t max_lag) {
    if (y.size() != x.size()) fail_invalid("correlate_direct: length mismatch");
    if (max_lag >= x.size()) fail_invalid("correlate_direct: max_lag must be < length");
    std::vector<cplx> r(max_lag + 1, cplx{0.0, 0.0});
    for (std::size_t k = 0; k <= max_lag; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t n = k; n < y.size(); ++n) {
            acc += y.samples[n] * std::conj(x.samples[n - k]);
        }
        r[k] = acc;
    }
    return r;
}

inline BatchSpectra batch_spectra(const IQBuffer& signal, const BatchGrid& grid,
                                  WindowKind window, SpectraKind kind) {
    if (signal.size() != grid.total_samples()) {
        fail_invalid("batch_spectra: signal length does not equal P*M");
    }
    BatchSpectra out;
    out.batch_count = grid.batch_count;
    out.batch_len = grid.batch_len;
    out.kind = kind;
    out.rows.resize(grid.total_samples());
    const auto w = make_window(window, grid.batch_len);
    const Fft fft(grid.batch_len);
    const double inv_m = 1.0 / static_cast<double>(grid.batch_len);
    for (std::size_t p = 0; p < grid.batch_count; ++p) {
        auto row = out.row(p);
        for (std::size_t i = 0; i < grid.batch_len; ++i) {
            row[i] = w[i] * signal.samples[p * grid.batch_len + i];
        }
        fft.forward(row);
        if (kind == SpectraKind::Reference) {
            for (auto& v : row) v *= inv_m;
        }
    }
    return out;
}

inline IQBuffer doppler_modulate(const IQBuffer& x, double v_r, const RadarParams& radar) {
    IQBuffer out = x;
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        out.samples[n] = x.samples[n] * doppler_phase(v_r, radar, static_cast<std::int64_t>(n));
    }
    return out;
}

inline BatchSpectra stretch_phase(const BatchSpectra& spectra, double v_r,
                                  const RadarParams& radar) {
    if (spectra.kind != SpectraKind::Received) {
        BatchSpectra out = spectra;
        for (std::size_t p = 0; p < out.batch_count; ++p) {
            auto row = out.row(p);
            for (std::size_t q = 0; q < out.batch_len; ++q) {
                row[q] *= stretch_phase_factor(v_r, radar, p, q, out.batch_len);
            }
        }
        return out;
    }
    throw std::logic_error("stretch_phase: applies to Reference spectra only");
}

namespace detail {

// Inner transform of the map equation: z_p[m] = sum_q Y conj(X') e^{+2 pi i q m / M},
// the per-batch circular correlation.
inline void correlation_row(std::span<const cplx> y_row, std::span<const cplx> x_row,
                            const Fft& fft_m, std::span<cplx> out) {
    for (std::size_t q = 0; q < out.size(); ++q) {
        out[q] = y_row[q] * std::conj(x_row[q]);
    }
    fft_m.inverse_unscaled(out);
}

// Slow-time DFT of every column of the P x M staging array, squared
// magnitude into the map. Columns are independent; safe to run in parallel.
inline void slow_time_power(const std::vector<cplx>& staging, std::size_t batch_count,
                            std::size_t batch_len, const Fft& fft_p, unsigned threads,
                            MemoryMeter* meter, RangeDopplerMap& map) {
    parallel_for(0, batch_len, threads, [&](std::size_t m) {
        MeteredBuffer<cplx> column(batch_count, meter);
        for (std::size_t p = 0; p < batch_count; ++p) {
            column[p] = staging[p * batch_len + m];
        }
        fft_p.forward({column.data(), batch_count});
        for (std::size_t l = 0; l < batch_count; ++l) {
            map.at(l, m) = std::norm(column[l]);
        }
    });
}

}  // namespace detail

// Map from prepared spectra (reference already Doppler-modulated and/or
// stretch-phased per the hypothesis).
inline RangeDopplerMap range_doppler_map(const BatchSpectra& y_spec,
                                         const BatchSpectra& x_spec,
                                         VelocityHypothesis hypothesis,
                                         const CPIConfig& config, unsigned threads = 1) {
    if (y_spec.batch_count != x_spec.batch_count || y_spec.batch_len != x_spec.batch_len) {
        fail_invalid("range_doppler_map: spectra dimensions disagree");
    }
    if (y_spec.batch_count != config.grid.batch_count ||
        y_spec.batch_len != config.grid.batch_len) {
        fail_invalid("range_doppler_map: spectra do not match config grid");
    }
    const std::size_t pn = config.grid.batch_count;
    const std::size_t mn = config.grid.batch_len;
    const Fft fft_m(mn);
    const Fft fft_p(pn);
    std::vector<cplx> staging(pn * mn);
    parallel_for(0, pn, threads, [&](std::size_t p) {
        detail::correlation_row(y_spec.row(p), x_spec.row(p), fft_m,
                                {staging.data() + p * mn, mn});
    });
    RangeDopplerMap map(config, hypothesis);
    detail::slow_time_power(staging, pn, mn, fft_p, threads, nullptr, map);
    return map;
}

// 129-tap Kaiser-windowed sinc interpolator, tabulated over 1024 fractional
// phases with linear interpolation between adjacent rows. Kernel error is
// far below the band-limiting stopband.
class SincInterpolator {
public:
    static constexpr int kHalf = 64;
    static constexpr int kTaps = 2 * kHalf + 1;
    static constexpr int kPhases = 1024;

    SincInterpolator() : table_(static_cast<std::size_t>(kPhases + 1) * kTaps) {
        constexpr double kBeta = 12.0;
        const double i0b = std::cyl_bessel_i(0.0, kBeta);
        for (int ph = 0; ph <= kPhases; ++ph) {
            const double fr = static_cast<double>(ph) / kPhases;
            for (int t = -kHalf; t <= kHalf; ++t) {
                const double u = static_cast<double>(t) - fr;
                const double sinc = (u == 0.0) ? 1.0 : std::sin(kPi * u) / (kPi * u);
                const double xw = u / (kHalf + 1.0);
                const double win = (std::abs(xw) >= 1.0)
                    ? 0.0
                    : std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - xw * xw)) / i0b;
                table_[static_cast<std::size_t>(ph) * kTaps + (t + kHalf)] = sinc * win;
            }
        }
    }

    static const SincInterpolator& instance() {
        static const SincInterpolator interp;
        return interp;
    }

    // Band-limited value at fractional index s of the samples around it;
    // base[i] must be valid for i in [floor(s)-kHalf, floor(s)+kHalf].
    template <class At>
    cplx value(At&& base, double s) const {
        const double flo = std::floor(s);
        const auto si = static_cast<std::int64_t>(flo);
        const double fr = s - flo;
        const double phf = fr * kPhases;
        const auto p0 = static_cast<std::size_t>(phf);
        const double w1 = phf - static_cast<double>(p0);
        const double* row0 = table_.data() + p0 * kTaps;
        const double* row1 = row0 + kTaps;
        cplx acc{0.0, 0.0};
        for (int t = -kHalf; t <= kHalf; ++t) {
            const double k0 = row0[t + kHalf];
            const double coeff = k0 + w1 * (row1[t + kHalf] - k0);
            acc += base(si + t) * coeff;
        }
        return acc;
    }

private:
    std::vector<double> table_;
};

// Reference evaluated at stretched instants t*(1 + 2 v_r / c): the matched
// time base of a closing target. Out-of-range source indices read as zero.
inline IQBuffer resample_reference(const IQBuffer& x, double v_r, const RadarParams& radar) {
    const auto& interp = SincInterpolator::instance();
    const double scale = 1.0 + 2.0 * v_r / radar.wave_speed_mps;
    IQBuffer out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.samples.resize(x.size());
    const auto n_in = static_cast<std::int64_t>(x.size());
    auto at = [&](std::int64_t i) {
        return (i < 0 || i >= n_in) ? cplx{0.0, 0.0}
                                    : x.samples[static_cast<std::size_t>(i)];
    };
    for (std::size_t n = 0; n < x.size(); ++n) {
        out.samples[n] = interp.value(at, static_cast<double>(n) * scale);
    }
    return out;
}

// Generator-backed variant: source samples outside the CPI come from the
// waveform's counter-based extension instead of zero padding.
inline IQBuffer resample_reference(const NoiseWaveform& reference, std::size_t length,
                                   double v_r, unsigned threads = 1) {
    const auto& interp = SincInterpolator::instance();
    const RadarParams& radar = reference.spec().radar;
    const double scale = 1.0 + 2.0 * v_r / radar.wave_speed_mps;
    IQBuffer out;
    out.sample_rate_hz = radar.sample_rate_hz;
    out.samples.resize(length);
    constexpr std::size_t kChunk = 1 << 14;
    const std::size_t chunks = (length + kChunk - 1) / kChunk;
    parallel_for(0, chunks, threads, [&](std::size_t ci) {
        const std::size_t lo = ci * kChunk;
        const std::size_t hi = std::min(length, lo + kChunk);
        const auto src_lo = static_cast<std::int64_t>(
            std::floor(static_cast<double>(lo) * scale)) - SincInterpolator::kHalf - 1;
        const auto src_hi = static_cast<std::int64_t>(
            std::ceil(static_cast<double>(hi) * scale)) + SincInterpolator::kHalf + 2;
        std::vector<cplx> slab(static_cast<std::size_t>(src_hi - src_lo));
        reference.fill(src_lo, slab);
        auto at = [&](std::int64_t i) { return slab[static_cast<std::size_t>(i - src_lo)]; };
        for (std::size_t n = lo; n < hi; ++n) {
            out.samples[n] = interp.value(at, static_cast<double>(n) * scale);
        }
    });
    return out;
}

// Batch-by-batch input for the streaming pass. fill() writes batch p of the
// reference into x and of the received signal into y; implementations must
// not retain sample storage beyond their own current batch.
class BatchSource {
public:
    virtual ~BatchSource() = default;
    virtual void fill(std::size_t batch, std::span<cplx> x, std::span<cplx> y) = 0;
};

class BufferBatchSource final : public BatchSource {
public:
    BufferBatchSource(const IQBuffer& x, const IQBuffer& y) : x_(x), y_(y) {}
    void fill(std::size_t batch, std::span<cplx> x, std::span<cplx> y) override {
        const std::size_t m = x.size();
        std::copy_n(x_.samples.begin() + static_cast<std::ptrdiff_t>(batch * m), m, x.begin());
        std::copy_n(y_.samples.begin() + static_cast<std::ptrdiff_t>(batch * m), m, y.begin());
    }

private:
    const IQBuffer& x_;
    const IQBuffer& y_;
};

// Streams two raw float32 files; holds one 4096-float codec chunk beyond the
// caller's batch spans so raw staging never exceeds two batches of samples.
class FileBatchSource final : public BatchSource {
public:
    FileBatchSource(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
                    MemoryMeter* meter = nullptr)
        : xs_(x_path, std::ios::binary), ys_(y_path, std::ios::binary), meter_(meter) {
        if (!xs_) fail_invalid("cannot open reference file: " + x_path.string());
        if (!ys_) fail_invalid("cannot open received file: " + y_path.string());
        if (meter_) meter_->add_raw(chunk_.size() * sizeof(float));
    }
    ~FileBatchSource() override {
        if (meter_) meter_->sub_raw(chunk_.size() * sizeof(float));
    }

    void fill(std::size_t batch, std::span<cplx> x, std::span<cplx> y) override {
        read_batch(xs_, batch, x);
        read_batch(ys_, batch, y);
    }

private:
    void read_batch(std::ifstream& is, std::size_t batch, std::span<cplx> out) {
        is.seekg(static_cast<std::streamoff>(batch * out.size() * 2 * sizeof(float)));
        std::size_t done = 0;
        while (done < out.size()) {
            const std::size_t take = std::min(chunk_.size() / 2, out.size() - done);
            is.read(reinterpret_cast<char*>(chunk_.data()),
                    static_cast<std::streamsize>(take * 2 * sizeof(float)));
            if (is.gcount() != static_cast<std::streamsize>(take * 2 * sizeof(float))) {
                fail_invalid("short read while streaming batch input");
            }
            for (std::size_t i = 0; i < take; ++i) {
                out[done + i] = {static_cast<double>(chunk_[2 * i]),
                                 static_cast<double>(chunk_[2 * i + 1])};
            }
            done += take;
        }
    }

    std::ifstream xs_;
    std::ifstream ys_;
    MemoryMeter* meter_;
    std::array<float, 4096> chunk_{};
};

// Shifts batch indices into an underlying source; used to slice one CPI out
// of a longer recording without buffering it.
class OffsetBatchSource final : public BatchSource {
public:
    OffsetBatchSource(BatchSource& inner, std::size_t batch_offset)
        : inner_(inner), offset_(batch_offset) {}
    void fill(std::size_t batch, std::span<cplx> x, std::span<cplx> y) override {
        inner_.fill(batch + offset_, x, y);
    }

private:
    BatchSource& inner_;
    std::size_t offset_;
};

struct ProcessOptions {
    unsigned threads = 1;
    MemoryMeter* meter = nullptr;
};

// Single streaming pass over the CPI: per batch, one received DFT, then per
// hypothesis one reference DFT plus the Eq.-style phase multiplications and
// one element-wise product, accumulated into that hypothesis's P x M
// staging. Nothing larger than the staging arrays and O(M) scratch is ever
// held; raw input lives only in the two current batch spans.
inline std::vector<RangeDopplerMap> process_cpi(BatchSource& source,
                                                std::span<const VelocityHypothesis> hypotheses,
                                                const CPIConfig& config,
                                                const ProcessOptions& opts = {}) {
    if (hypotheses.empty()) fail_invalid("process_cpi: no hypotheses");
    const std::size_t pn = config.grid.batch_count;
    const std::size_t mn = config.grid.batch_len;
    const std::size_t hn = hypotheses.size();
    MemoryMeter* meter = opts.meter;

    const Fft fft_m(mn);
    const Fft fft_p(pn);
    const auto window = make_window(config.window, mn);
    if (meter) meter->add_work(window.size() * sizeof(double));
    const double inv_m = 1.0 / static_cast<double>(mn);

    MeteredBuffer<cplx> x_batch(mn, meter, /*raw_input=*/true);
    MeteredBuffer<cplx> y_batch(mn, meter, /*raw_input=*/true);
    MeteredBuffer<cplx> y_row(mn, meter);

    std::vector<MeteredBuffer<cplx>> staging;
    std::vector<MeteredBuffer<cplx>> ref_scratch;
    staging.reserve(hn);
    ref_scratch.reserve(hn);
    for (std::size_t h = 0; h < hn; ++h) {
        staging.emplace_back(pn * mn, meter);
        ref_scratch.emplace_back(mn, meter);
    }

    for (std::size_t p = 0; p < pn; ++p) {
        source.fill(p, {x_batch.data(), mn}, {y_batch.data(), mn});
        std::copy_n(y_batch.data(), mn, y_row.data());
        fft_m.forward({y_row.data(), mn});

        parallel_for(0, hn, opts.threads, [&](std::size_t h) {
            const auto& hyp = hypotheses[h];
            std::span<cplx> ref(ref_scratch[h].data(), mn);
            if (hyp.doppler) {
                for (std::size_t i = 0; i < mn; ++i) {
                    const auto n = static_cast<std::int64_t>(p * mn + i);
                    const cplx modulated =
                        x_batch[i] * doppler_phase(hyp.reference_velocity_mps, config.radar, n);
                    ref[i] = window[i] * modulated;
                }
            } else {
                for (std::size_t i = 0; i < mn; ++i) ref[i] = window[i] * x_batch[i];
            }
            fft_m.forward(ref);
            for (auto& v : ref) v *= inv_m;
            if (hyp.stretch) {
                for (std::size_t q = 0; q < mn; ++q) {
                    ref[q] *= stretch_phase_factor(hyp.reference_velocity_mps, config.radar,
                                                   p, q, mn);
                }
            }
            std::span<cplx> z(staging[h].data() + p * mn, mn);
            detail::correlation_row({y_row.data(), mn}, ref, fft_m, z);
        });
    }

    std::vector<RangeDopplerMap> maps;
    maps.reserve(hn);
    for (std::size_t h = 0; h < hn; ++h) {
        maps.emplace_back(config, hypotheses[h]);
        if (meter) meter->add_work(maps.back().power.size() * sizeof(double));
        detail::slow_time_power(staging[h].vec(), pn, mn, fft_p, opts.threads, meter,
                                maps.back());
    }
    return maps;
}

inline std::vector<RangeDopplerMap> process_cpi(const IQBuffer& y, const IQBuffer& x,
                                                std::span<const VelocityHypothesis> hypotheses,
                                                const CPIConfig& config,
                                                const ProcessOptions& opts = {}) {
    if (y.size() != x.size()) fail_invalid("process_cpi: buffer lengths differ");
    if (y.size() != config.grid.total_samples()) {
        fail_invalid("process_cpi: buffer length does not equal P*M");
    }
    BufferBatchSource source(x, y);
    return process_cpi(source, hypotheses, config, opts);
}

inline nlohmann::json hypothesis_to_json(const VelocityHypothesis& h) {
    nlohmann::json j;
    j["velocity_mps"] = h.reference_velocity_mps;
    j["doppler"] = h.doppler;
    j["stretch"] = h.stretch;
    return j;
}

// Map export: row-major P x M little-endian float32 linear power, a JSON
// sidecar with the hypothesis/axes/config, and a downsampled CSV for plots.
inline void write_map(const std::filesystem::path& bin_path, const RangeDopplerMap& map,
                      const nlohmann::json& extra_meta = {}) {
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) fail_invalid("cannot open for writing: " + bin_path.string());
    std::vector<float> packed(map.power.size());
    for (std::size_t i = 0; i < map.power.size(); ++i) {
        packed[i] = static_cast<float>(map.power[i]);
    }
    os.write(reinterpret_cast<const char*>(packed.data()),
             static_cast<std::streamsize>(packed.size() * sizeof(float)));

    nlohmann::json j = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
    j["doppler_bins"] = map.doppler_bins;
    j["range_bins"] = map.range_bins;
    j["hypothesis"] = hypothesis_to_json(map.hypothesis);
    j["label"] = map.label;
    j["radar"] = {{"carrier_freq_hz", map.config.radar.carrier_freq_hz},
                  {"sample_rate_hz", map.config.radar.sample_rate_hz},
                  {"bandwidth_hz", map.config.radar.bandwidth_hz},
                  {"wave_speed_mps", map.config.radar.wave_speed_mps}};
    j["window"] = window_name(map.config.window);
    const auto ax = map.axes();
    j["range_bin_m"] = ax.range_m(1);
    j["doppler_bin_mps"] = ax.doppler_bin_width_mps();
    std::ofstream js(bin_path.string() + ".json");
    js << j.dump(2) << "\n";
}

inline void write_map_csv(const std::filesystem::path& csv_path, const RangeDopplerMap& map,
                          std::size_t max_rows_per_axis = 256) {
    std::ofstream os(csv_path);
    if (!os) fail_invalid("cannot open for writing: " + csv_path.string());
    const std::size_t lstride = std::max<std::size_t>(1, map.doppler_bins / max_rows_per_axis);
    const std::size_t mstride = std::max<std::size_t>(1, map.range_bins / max_rows_per_axis);
    const auto ax = map.axes();
    os << "doppler_bin,range_bin,velocity_mps,range_m,power_db\n";
    char line[160];
    for (std::size_t l = 0; l < map.doppler_bins; l += lstride) {
        for (std::size_t m = 0; m < map.range_bins; m += mstride) {
            const double pw = map.at(l, m);
            const double db = pw > 0.0 ? 10.0 * std::log10(pw) : -999.0;
            std::snprintf(line, sizeof(line), "%zu,%zu,%.6f,%.3f,%.2f\n", l, m,
                          ax.velocity_mps(l), ax.range_m(m), db);
            os << line;
        }
    }
}

}  // namespace nrad
