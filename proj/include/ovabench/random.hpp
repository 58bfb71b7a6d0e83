#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ovabench {

/// Seeded generator used everywhere in the project.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// derives uniforms and normals with explicit transforms, so streams are
/// identical across standard library implementations. std::*_distribution is
/// deliberately not used: its algorithms are implementation-defined.
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64/uniform53/box-muller";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via the Box-Muller transform; the second variate is cached.
    double normal();

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// SplitMix64 finalizer, used to derive independent sub-seeds from one root seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ovabench
