#include "sinterp/image.hpp"

#include "sinterp/error.hpp"

#include <cmath>
#include <string>

namespace sinterp {

namespace {

void check_values(std::span<const float> data, const char* what)
{
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i]) || data[i] < 0.0f)
            throw ValidationError(std::string(what) + ": element " + std::to_string(i) + " is "
                                  + std::to_string(data[i]) + ", expected a finite nonnegative value");
    }
}

} // namespace

Image Image::zeros(std::int64_t width, std::int64_t height, double pixel_size)
{
    if (width < 1 || height < 1)
        throw ValidationError("image extents must be positive, got " + std::to_string(height) + "x"
                              + std::to_string(width));
    Image img;
    img.width = width;
    img.height = height;
    img.pixel_size = pixel_size;
    img.data.assign(static_cast<std::size_t>(width * height), 0.0f);
    return img;
}

void Image::validate() const
{
    if (width < 1 || height < 1 || data.size() != static_cast<std::size_t>(width * height))
        throw ValidationError("image: " + std::to_string(height) + "x" + std::to_string(width) + " extents but "
                              + std::to_string(data.size()) + " values");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
        throw ValidationError("image: pixel size must be positive");
    check_values(data, "image");
}

Sinogram Sinogram::zeros(std::int64_t n_angles, std::int64_t n_bins, double start_angle_deg,
                         double angular_range_deg, double bin_width)
{
    if (n_angles < 1 || n_bins < 1)
        throw ValidationError("sinogram extents must be positive, got " + std::to_string(n_angles) + "x"
                              + std::to_string(n_bins));
    Sinogram s;
    s.n_angles = n_angles;
    s.n_bins = n_bins;
    s.start_angle_deg = start_angle_deg;
    s.angular_range_deg = angular_range_deg;
    s.bin_width = bin_width;
    s.data.assign(static_cast<std::size_t>(n_angles * n_bins), 0.0f);
    return s;
}

double Sinogram::angle_deg(std::int64_t i) const
{
    return view_angle_deg(start_angle_deg, angular_range_deg, i, n_angles);
}

void Sinogram::validate() const
{
    if (n_angles < 1 || n_bins < 1 || data.size() != static_cast<std::size_t>(n_angles * n_bins))
        throw ValidationError("sinogram: " + std::to_string(n_angles) + "x" + std::to_string(n_bins)
                              + " extents but " + std::to_string(data.size()) + " values");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
        throw ValidationError("sinogram: bin width must be positive");
    check_values(data, "sinogram");
}

double view_angle_deg(double start_deg, double range_deg, std::int64_t i, std::int64_t n)
{
    // (range * i) / n: scaling i and n by the same power of two scales both
    // roundings exactly, so nested view sets share angles.
    return start_deg + range_deg * static_cast<double>(i) / static_cast<double>(n);
}

} // namespace sinterp
