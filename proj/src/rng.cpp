#include "sinterp/rng.hpp"

namespace sinterp {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept
{
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
{
    std::uint64_t h = splitmix64_mix(seed + kGolden * (stream + 1));
    return splitmix64_mix(h + kGolden * (index + 1));
}

} // namespace sinterp
