#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

#include "nrad/common.hpp"
#include "nrad/model.hpp"
#include "nrad/processor.hpp"
#include "nrad/scene.hpp"

namespace nrad {

// Inclusive bin ranges restricting the peak search.
struct SearchRegion {
    std::size_t doppler_lo = 0;
    std::size_t doppler_hi = 0;
    std::size_t range_lo = 0;
    std::size_t range_hi = 0;
};

struct SinrOptions {
    std::optional<SearchRegion> search;
    std::size_t guard_cells = 3;              // guard box half-width, both axes
    std::size_t zero_doppler_halfwidth = 2;   // clutter band excluded from the floor
};

struct SinrReport {
    double peak_power_db = 0.0;
    std::size_t peak_doppler_bin = 0;
    std::size_t peak_range_bin = 0;
    double floor_power_db = 0.0;
    double sinr_db = 0.0;
    std::size_t guard_cells = 0;
    std::size_t zero_doppler_halfwidth = 0;
    std::size_t floor_cell_count = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["peak_power_db"] = peak_power_db;
        j["peak_doppler_bin"] = peak_doppler_bin;
        j["peak_range_bin"] = peak_range_bin;
        j["floor_power_db"] = floor_power_db;
        j["sinr_db"] = sinr_db;
        j["exclusion"] = {{"guard_cells", guard_cells},
                          {"zero_doppler_halfwidth", zero_doppler_halfwidth},
                          {"floor_cell_count", floor_cell_count}};
        return j;
    }
};

// Peak over the search region (whole map by default, row-major tie-break),
// floor as the mean linear power outside the guard box around the peak and
// outside the zero-Doppler clutter band. SINR is their ratio in dB.
inline SinrReport measure_sinr(const RangeDopplerMap& map, const SinrOptions& opts = {}) {
    const std::size_t pn = map.doppler_bins;
    const std::size_t mn = map.range_bins;
    if (pn == 0 || mn == 0) fail_invalid("measure_sinr: empty map");

    SearchRegion region{0, pn - 1, 0, mn - 1};
    if (opts.search) {
        region = *opts.search;
        if (region.doppler_hi >= pn || region.range_hi >= mn ||
            region.doppler_lo > region.doppler_hi || region.range_lo > region.range_hi) {
            fail_invalid("measure_sinr: search region out of bounds");
        }
    }

    double peak = -1.0;
    std::size_t pl = 0;
    std::size_t pm = 0;
    for (std::size_t l = region.doppler_lo; l <= region.doppler_hi; ++l) {
        for (std::size_t m = region.range_lo; m <= region.range_hi; ++m) {
            const double v = map.at(l, m);
            if (v > peak) {
                peak = v;
                pl = l;
                pm = m;
            }
        }
    }

    const auto g = static_cast<std::ptrdiff_t>(opts.guard_cells);
    const auto zd = opts.zero_doppler_halfwidth;
    auto in_guard = [&](std::size_t l, std::size_t m) {
        const auto dl = std::abs(static_cast<std::ptrdiff_t>(l) - static_cast<std::ptrdiff_t>(pl));
        const auto dm = std::abs(static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(pm));
        return dl <= g && dm <= g;
    };
    auto in_zero_doppler_band = [&](std::size_t l) {
        return l <= zd || l + zd >= pn;
    };

    double floor_sum = 0.0;
    std::size_t floor_count = 0;
    for (std::size_t l = 0; l < pn; ++l) {
        const bool banded = in_zero_doppler_band(l);
        for (std::size_t m = 0; m < mn; ++m) {
            if (banded || in_guard(l, m)) continue;
            floor_sum += map.at(l, m);
            ++floor_count;
        }
    }
    if (floor_count == 0) {
        fail_invalid("measure_sinr: exclusions leave no floor cells");
    }

    SinrReport rep;
    rep.peak_power_db = to_db(peak);
    rep.peak_doppler_bin = pl;
    rep.peak_range_bin = pm;
    rep.floor_power_db = to_db(floor_sum / static_cast<double>(floor_count));
    rep.sinr_db = rep.peak_power_db - rep.floor_power_db;
    rep.guard_cells = opts.guard_cells;
    rep.zero_doppler_halfwidth = opts.zero_doppler_halfwidth;
    rep.floor_cell_count = floor_count;
    return rep;
}

// Mean linear power over the analytic smear footprint of a known target:
// range bins covered by the delay trajectory over the CPI and Doppler bins
// covered by the migration-induced spread (one bin per sample slipped).
inline double smeared_target_average_db(const RangeDopplerMap& map, const PointTarget& truth,
                                        const CPIConfig& config) {
    const double fs = config.radar.sample_rate_hz;
    const double c = config.radar.wave_speed_mps;
    const double t_int = config.integration_time_s();
    const double d_start = truth.delay_s(0.0, c) * fs;
    const double d_end = truth.delay_s(t_int, c) * fs;
    const double d_lo = std::min(d_start, d_end);
    const double d_hi = std::max(d_start, d_end);

    const auto m_lo_s = static_cast<std::ptrdiff_t>(std::floor(d_lo));
    const auto m_hi_s = static_cast<std::ptrdiff_t>(std::ceil(d_hi));
    if (m_lo_s < 0 || m_hi_s >= static_cast<std::ptrdiff_t>(map.range_bins)) {
        fail_invalid("smeared_target_average: footprint outside map");
    }
    const auto m_lo = static_cast<std::size_t>(m_lo_s);
    const auto m_hi = static_cast<std::size_t>(m_hi_s);

    const auto ax = map.axes();
    const std::size_t l_center = ax.doppler_bin(truth.radial_velocity_mps);
    const double slip_samples = std::abs(d_end - d_start);
    const auto l_half = static_cast<std::size_t>(
        std::max(0.0, std::ceil(slip_samples / 2.0)));

    double acc = 0.0;
    std::size_t count = 0;
    const auto pn = static_cast<std::ptrdiff_t>(map.doppler_bins);
    for (std::ptrdiff_t dl = -static_cast<std::ptrdiff_t>(l_half);
         dl <= static_cast<std::ptrdiff_t>(l_half); ++dl) {
        std::ptrdiff_t l = (static_cast<std::ptrdiff_t>(l_center) + dl) % pn;
        if (l < 0) l += pn;
        for (std::size_t m = m_lo; m <= m_hi; ++m) {
            acc += map.at(static_cast<std::size_t>(l), m);
            ++count;
        }
    }
    return to_db(acc / static_cast<double>(count));
}

struct GainCurve {
    struct Point {
        double integration_time_s;
        double sinr_db;
        double sinr_increase_db;  // relative to the shortest time
    };
    std::vector<Point> points;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : points) {
            arr.push_back({{"integration_time_s", p.integration_time_s},
                           {"sinr_db", p.sinr_db},
                           {"sinr_increase_db", p.sinr_increase_db}});
        }
        return arr;
    }
};

// SINR of nested CPIs T0 * 2^k starting at start_time, all under the same
// hypothesis. Batch length is fixed; the Doppler bin count doubles with the
// duration. First point's increase is 0 by construction.
inline GainCurve gain_vs_integration_time(const IQBuffer& y, const IQBuffer& x,
                                          const CPIConfig& base_config,
                                          VelocityHypothesis hypothesis,
                                          double start_time_s, unsigned doublings,
                                          const SinrOptions& sinr_opts = {},
                                          unsigned threads = 1) {
    const std::size_t mn = base_config.grid.batch_len;
    const double fs = base_config.radar.sample_rate_hz;
    const auto start = static_cast<std::size_t>(std::llround(start_time_s * fs));
    const std::size_t longest = base_config.grid.total_samples() << doublings;
    if (start + longest > y.size() || y.size() != x.size()) {
        fail_invalid("gain_vs_integration_time: buffers hold " +
                     std::to_string(y.size()) + " samples, need " +
                     std::to_string(start + longest) + " (start + longest CPI)");
    }

    GainCurve curve;
    double base_sinr = 0.0;
    for (unsigned k = 0; k <= doublings; ++k) {
        const std::size_t pk = base_config.grid.batch_count << k;
        CPIConfig cfg(base_config.radar, BatchGrid(pk, mn, fs), base_config.window);
        IQBuffer ys{std::vector<cplx>(y.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                      y.samples.begin() + static_cast<std::ptrdiff_t>(start + pk * mn)),
                    fs};
        IQBuffer xs{std::vector<cplx>(x.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                      x.samples.begin() + static_cast<std::ptrdiff_t>(start + pk * mn)),
                    fs};
        const VelocityHypothesis hyps[] = {hypothesis};
        auto maps = process_cpi(ys, xs, hyps, cfg, ProcessOptions{threads, nullptr});
        const auto rep = measure_sinr(maps.front(), sinr_opts);
        if (k == 0) base_sinr = rep.sinr_db;
        curve.points.push_back({cfg.integration_time_s(), rep.sinr_db,
                                rep.sinr_db - base_sinr});
    }
    return curve;
}

}  // namespace nrad
