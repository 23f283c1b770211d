#pragma once

#include <cstdint>
#include <random>

namespace sinterp {

/// SplitMix64 output function (Steele, Lea & Flood 2014) applied to `x`.
std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

/// Seed of an independent stream, a pure function of (seed, stream, index):
///
///   h = mix(seed + G * (stream + 1))
///   h = mix(h    + G * (index + 1))
///
/// with G = 0x9E3779B97F4A7C15 and mix = splitmix64_mix. Streams in use:
/// see `Stream`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept;

enum class Stream : std::uint64_t
{
    Phantom = 1,
    Noise = 2,
    WeightInit = 3,
    Split = 4,
    Shuffle = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept
{
    return derive_seed(seed, static_cast<std::uint64_t>(stream), index);
}

/// std::mt19937_64 with portable conversions. The engine's output sequence is
/// fixed by the C++ standard; the distributions below are defined here
/// rather than taken from <random>, whose algorithms vary by vendor.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// 53-bit uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        const auto span = static_cast<double>(hi - lo + 1);
        auto v = lo + static_cast<std::int64_t>(uniform() * span);
        return v > hi ? hi : v;
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace sinterp
