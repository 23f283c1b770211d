#pragma once

#include "sinterp/image.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace sinterp {

/// Uniform-intensity ellipse. Inside when, with p the offset from the centre
/// rotated by -angle_deg, (p.x/a)^2 + (p.y/b)^2 <= 1. Values are additive.
struct Ellipse
{
    double cx;
    double cy;
    double a;
    double b;
    double angle_deg;
    double value;
};

/// Ten-ellipse head phantom, coordinates in the unit square [-1,1]^2 with y up.
/// Original intensities (skull 2.0, brain 1.02 ... ); the table is not
/// mirror-symmetric.
const std::array<Ellipse, 10>& shepp_logan_table();

/// Renders ellipses given in [-1,1]^2 coordinates onto an n x n grid,
/// averaging `supersample`^2 point samples per pixel. Negative sums clip to 0.
/// No normalization.
Image render_ellipses(std::span<const Ellipse> ellipses, std::int64_t n, int supersample = 4);

/// Shepp-Logan at n x n, max-normalized to 1. n >= 16.
Image shepp_logan(std::int64_t n);

/// Distribution of random training phantoms. Lengths are in pixels and
/// positions relative to the image centre.
struct PhantomRecipe
{
    std::uint64_t seed = 0;
    std::int64_t size = 128;
    double fov_fraction = 0.48; // FOV radius / width
    int min_ellipses = 2;
    int max_ellipses = 10;
    double center_fraction = 0.8; // centres uniform in a disk of this fraction of the FOV
    double min_semi_axis = 4.0;
    double max_semi_axis = 40.0;
    double min_intensity = 0.2;
    double max_intensity = 1.0;
    int min_blobs = 0;
    int max_blobs = 3;
    double min_sigma = 2.0;
    double max_sigma = 8.0;

    double fov_radius() const noexcept { return fov_fraction * static_cast<double>(size); }
    void validate() const;
};

/// Phantom `index` of the recipe: a pure function of (seed, index). Ellipses
/// and Gaussian blobs are summed at pixel centres, everything at or beyond
/// the FOV radius is zeroed and the result divided by its maximum.
Image generate_phantom(const PhantomRecipe& recipe, std::uint64_t index);

/// Pixel centres with x^2 + y^2 < radius^2, in pixel units.
bool inside_fov(const Image& image, std::int64_t row, std::int64_t col, double radius);

} // namespace sinterp
