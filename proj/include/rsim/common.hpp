#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace rsim {

inline constexpr double kMphToMps = 0.44704;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV/JSON); message names the offending line where known.
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid input that violates a data contract (ordering, balance,
/// degenerate variance, missing class, ...).
struct DataError : Error {
    using Error::Error;
};

/// Filesystem-level failure (missing file, unwritable directory).
struct IoError : Error {
    using Error::Error;
};

/// Input present but empty where content is required.
struct EmptyInputError : Error {
    using Error::Error;
};

/// Scenario timing target unreachable within the configured limits.
struct ScheduleError : Error {
    using Error::Error;
};

/// Simulation failed to terminate within the time limit.
struct TimeoutError : Error {
    using Error::Error;
};

/// Fixed-format floating point for CSV output: shortest of %.12g that round-trips
/// our needs, stable across runs and thread counts.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Deterministic random primitives.
//
// std::mt19937_64 is bit-exact across platforms, but the standard distribution
// adapters are not; the samplers below pin the full bit path so that a seed
// yields one byte-identical stream everywhere.
// ---------------------------------------------------------------------------

/// splitmix64: cheap stream splitter used to derive independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// xoshiro-free minimal engine wrapper: uniform doubles in [0,1) from the top
/// 53 bits of an mt19937_64-compatible stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {
        // warm up so near-zero seeds decorrelate
        for (int i = 0; i < 4; ++i) splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (polar form avoided to keep the
    /// consumption pattern fixed: exactly two uniforms per pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // u1 == 0 would take log(0); nudge to the smallest representable step
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Normal truncated to +-3 sigma (resampled), used for parameter jitter so
    /// bounded orderings survive every draw.
    double normal_truncated3() {
        for (;;) {
            double z = normal();
            if (z >= -3.0 && z <= 3.0) return z;
        }
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rsim
