#pragma once

#include <cstdint>
#include <random>

namespace nds {

/// The one seeded generator of a simulation run.
/// std::mt19937_64 output is fully specified by the standard; the real-valued
/// distributions are not, so the uniform conversion is done here to keep runs
/// bit-identical across standard libraries.
class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : _gen{seed} {}

    std::uint64_t next_u64() { return _gen(); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(_gen() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi]; hi is reachable only up to rounding.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(_gen() % span);
    }

private:
    std::mt19937_64 _gen;
};

} // namespace nds
