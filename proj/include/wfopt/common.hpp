#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfopt {

inline constexpr double kMu0 = 1.25663706212e-6;  // vacuum permeability, H/m
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kCopperResistivity20C = 1.72e-8;  // ohm*m
inline constexpr double kCopperTempCoeff = 0.00393;       // 1/K
inline constexpr double kGravity = 9.81;                  // m/s^2

inline double rpm_to_rad_s(double rpm) { return rpm * kPi / 30.0; }
inline double rad_s_to_rpm(double w) { return w * 30.0 / kPi; }

// Configuration / input-file problems (bad paths, missing keys, bad syntax).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A loaded object violates one of its declared invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Nonlinear solver failed to converge; carries the last residual.
class SolverDivergence : public std::runtime_error {
public:
    SolverDivergence(const std::string& msg, double residual)
        : std::runtime_error(msg), last_residual(residual) {}
    double last_residual;
};

// A requested operating point cannot be met; carries what was achievable.
class Infeasible : public std::runtime_error {
public:
    explicit Infeasible(const std::string& msg, double achievable = 0.0)
        : std::runtime_error(msg), achievable_value(achievable) {}
    double achievable_value;
};

// FNV-1a 64-bit, used for config/input hashes recorded in output files.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Shortest-round-trip decimal formatting for doubles: deterministic across
// runs and lossless on re-parse. Used by every text emitter.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return std::string(buf);
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

}  // namespace wfopt
