#pragma once

#include "sinterp/image.hpp"
#include "sinterp/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sinterp {

enum class NoiseLevel
{
    Low,
    Medium,
    High,
};

inline constexpr std::array<NoiseLevel, 3> kNoiseLevels{NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High};

/// Expected total counts of a sinogram at this level: 1e6, 2.5e5, 5e4.
double total_counts(NoiseLevel level) noexcept;
const char* to_string(NoiseLevel level) noexcept;
std::optional<NoiseLevel> parse_noise_level(std::string_view text);

/// One Poisson draw with mean `lambda` >= 0. Sequential inversion below
/// lambda = 10, otherwise transformed rejection with squeeze (PTRS,
/// Hormann 1993).
std::int64_t sample_poisson(Rng& rng, double lambda);

/// Scales `sino` so its total equals total_counts(level), replaces each bin by
/// a Poisson draw with that mean and scales back. Bins are drawn in row-major
/// order from Rng(seed). Throws ValidationError on a zero-mass sinogram.
Sinogram apply_poisson(const Sinogram& sino, NoiseLevel level, std::uint64_t seed);

/// Same, with an explicit expected total.
Sinogram apply_poisson_counts(const Sinogram& sino, double counts, std::uint64_t seed);

} // namespace sinterp
