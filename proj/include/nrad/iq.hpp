#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "nrad/common.hpp"

namespace nrad {

// A finite run of complex baseband samples with its sample rate.
struct IQBuffer {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }

    void validate() const {
        if (!(sample_rate_hz > 0.0)) fail_invalid("IQBuffer: sample rate must be positive");
        for (const auto& s : samples) {
            if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
                fail_invalid("IQBuffer: non-finite sample");
            }
        }
    }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& s : samples) acc += std::norm(s);
        return std::sqrt(acc / static_cast<double>(samples.size()));
    }
};

// Descriptor written next to each raw buffer file. Extra keys (config hash,
// tool version) may be present; the four below are the fixed schema.
struct IQSidecar {
    double sample_rate_hz = 0.0;
    std::uint64_t length = 0;
    std::uint64_t seed = 0;
    double bandwidth_hz = 0.0;
    nlohmann::json extra;  // merged into the sidecar document as-is
};

// Raw binary layout: interleaved little-endian float32 (re, im) pairs.
inline void write_iq(const std::filesystem::path& bin_path, const IQBuffer& buf,
                     const IQSidecar& meta) {
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) fail_invalid("cannot open for writing: " + bin_path.string());
    std::vector<float> packed(buf.samples.size() * 2);
    for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        packed[2 * i] = static_cast<float>(buf.samples[i].real());
        packed[2 * i + 1] = static_cast<float>(buf.samples[i].imag());
    }
    os.write(reinterpret_cast<const char*>(packed.data()),
             static_cast<std::streamsize>(packed.size() * sizeof(float)));
    if (!os) fail_invalid("write failed: " + bin_path.string());

    nlohmann::json j = meta.extra.is_object() ? meta.extra : nlohmann::json::object();
    j["sample_rate_hz"] = meta.sample_rate_hz;
    j["length"] = meta.length;
    j["seed"] = meta.seed;
    j["bandwidth_hz"] = meta.bandwidth_hz;
    std::ofstream js(bin_path.string() + ".json");
    if (!js) fail_invalid("cannot open sidecar for writing: " + bin_path.string() + ".json");
    js << j.dump(2) << "\n";
}

inline IQBuffer read_iq(const std::filesystem::path& bin_path, IQSidecar* meta_out = nullptr) {
    std::ifstream js(bin_path.string() + ".json");
    if (!js) fail_invalid("missing sidecar: " + bin_path.string() + ".json");
    nlohmann::json j;
    js >> j;
    IQSidecar meta;
    meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    meta.length = j.at("length").get<std::uint64_t>();
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.bandwidth_hz = j.value("bandwidth_hz", 0.0);
    if (meta_out) *meta_out = meta;

    std::ifstream is(bin_path, std::ios::binary);
    if (!is) fail_invalid("cannot open for reading: " + bin_path.string());
    std::vector<float> packed(meta.length * 2);
    is.read(reinterpret_cast<char*>(packed.data()),
            static_cast<std::streamsize>(packed.size() * sizeof(float)));
    if (is.gcount() != static_cast<std::streamsize>(packed.size() * sizeof(float))) {
        fail_invalid("short read (file/sidecar length mismatch): " + bin_path.string());
    }
    IQBuffer buf;
    buf.sample_rate_hz = meta.sample_rate_hz;
    buf.samples.resize(meta.length);
    for (std::size_t i = 0; i < meta.length; ++i) {
        buf.samples[i] = {static_cast<double>(packed[2 * i]),
                          static_cast<double>(packed[2 * i + 1])};
    }
    return buf;
}

}  // namespace nrad
