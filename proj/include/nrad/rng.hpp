#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "nrad/common.hpp"

namespace nrad {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Output for index n is a pure function of
// (key, n), so any sample can be produced in any order or in parallel.
struct Philox4x32 {
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

    // Convenience layout: 64-bit sample index in the low counter words, a
    // domain tag in the third word to keep independent streams (waveform,
    // scene noise, ...) from colliding even under equal seeds.
    static std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t index,
                                              std::uint32_t domain) {
        return block({static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32), domain, 0u},
                     {static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32)});
    }
};

namespace rng_domain {
inline constexpr std::uint32_t kWaveform = 0;
inline constexpr std::uint32_t kSceneNoise = 1;
}  // namespace rng_domain

// Circularly-symmetric unit-variance complex Gaussian for sample `index`:
// magnitude sqrt(-ln u1) (Rayleigh, E|g|^2 = 1), phase 2*pi*u2.
inline cplx gaussian_sample(std::uint64_t seed, std::int64_t index, std::uint32_t domain) {
    const auto r = Philox4x32::block(seed, static_cast<std::uint64_t>(index), domain);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (static_cast<double>(a) + 1.0) * 0x1p-64;
    const double u2 = static_cast<double>(b) * 0x1p-64;
    const double mag = std::sqrt(-std::log(u1));
    return {mag * std::cos(kTwoPi * u2), mag * std::sin(kTwoPi * u2)};
}

}  // namespace nrad
