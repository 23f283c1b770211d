#include "sinterp/noise.hpp"

#include "sinterp/error.hpp"

#include <cmath>

namespace sinterp {

double total_counts(NoiseLevel level) noexcept
{
    switch (level) {
    case NoiseLevel::Low:
        return 1.0e6;
    case NoiseLevel::Medium:
        return 2.5e5;
    case NoiseLevel::High:
        return 5.0e4;
    }
    return 0.0;
}

const char* to_string(NoiseLevel level) noexcept
{
    switch (level) {
    case NoiseLevel::Low:
        return "low";
    case NoiseLevel::Medium:
        return "medium";
    case NoiseLevel::High:
        return "high";
    }
    return "?";
}

std::optional<NoiseLevel> parse_noise_level(std::string_view text)
{
    for (auto level : kNoiseLevels)
        if (text == to_string(level))
            return level;
    return std::nullopt;
}

namespace {

std::int64_t poisson_inversion(Rng& rng, double lambda)
{
    const double u = rng.uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    std::int64_t k = 0;
    // The tail beyond k = 200 is far below 2^-53 for lambda < 10.
    while (u > cdf && k < 200) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

std::int64_t poisson_ptrs(Rng& rng, double lambda)
{
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr)
            return static_cast<std::int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us))
            continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b)
            <= -lambda + k * loglam - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(k);
    }
}

} // namespace

std::int64_t sample_poisson(Rng& rng, double lambda)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("sample_poisson: mean must be finite and nonnegative, got " + std::to_string(lambda));
    if (lambda == 0.0)
        return 0;
    return lambda < 10.0 ? poisson_inversion(rng, lambda) : poisson_ptrs(rng, lambda);
}

Sinogram apply_poisson_counts(const Sinogram& sino, double counts, std::uint64_t seed)
{
    sino.validate();
    if (!(counts > 0.0) || !std::isfinite(counts))
        throw ValidationError("apply_poisson: expected total counts must be positive");
    double mass = 0.0;
    for (float v : sino.data)
        mass += v;
    if (!(mass > 0.0))
        throw ValidationError("apply_poisson: sinogram has zero total mass, cannot calibrate counts");
    const double scale = counts / mass;
    Rng rng(seed);
    Sinogram out = sino;
    for (auto& v : out.data) {
        const auto k = sample_poisson(rng, static_cast<double>(v) * scale);
        v = static_cast<float>(static_cast<double>(k) / scale);
    }
    return out;
}

Sinogram apply_poisson(const Sinogram& sino, NoiseLevel level, std::uint64_t seed)
{
    return apply_poisson_counts(sino, total_counts(level), seed);
}

} // namespace sinterp
