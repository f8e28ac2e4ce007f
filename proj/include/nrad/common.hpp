#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nrad {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Exact SI value; experiment configs may pin 3.0e8 instead.
inline constexpr double kSpeedOfLightSI = 2.99792458e8;

// Sentinel for losses/times with no finite value (perfect autocorrelation,
// zero-velocity coherence limit, nulls of sin(u)/u).
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

[[noreturn]] inline void fail_invalid(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace nrad
