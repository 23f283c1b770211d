#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sinterp {

/// Read-only 2-D row-major view shared by images and sinograms.
struct GridView
{
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::span<const float> data;
};

/// Activity map. Pixel (row, col) is centred at
///   x = (col + 0.5 - width/2)  * pixel_size
///   y = (height/2 - row - 0.5) * pixel_size
/// so row 0 is the top of the image and y points up.
struct Image
{
    std::int64_t width = 0;
    std::int64_t height = 0;
    double pixel_size = 1.0;
    std::vector<float> data;

    static Image zeros(std::int64_t width, std::int64_t height, double pixel_size = 1.0);

    float at(std::int64_t row, std::int64_t col) const { return data[static_cast<std::size_t>(row * width + col)]; }
    float& at(std::int64_t row, std::int64_t col) { return data[static_cast<std::size_t>(row * width + col)]; }

    GridView view() const { return {height, width, data}; }

    /// Throws ValidationError unless extents match the data and every value
    /// is finite and nonnegative.
    void validate() const;

    bool operator==(const Image&) const = default;
};

/// Rows are angles, columns detector bins. Angle i sits at
/// start_angle_deg + angular_range_deg * i / n_angles.
struct Sinogram
{
    std::int64_t n_angles = 0;
    std::int64_t n_bins = 0;
    double start_angle_deg = 0.0;
    double angular_range_deg = 360.0;
    double bin_width = 1.0;
    std::vector<float> data;

    static Sinogram zeros(std::int64_t n_angles, std::int64_t n_bins, double start_angle_deg = 0.0,
                          double angular_range_deg = 360.0, double bin_width = 1.0);

    double angle_deg(std::int64_t i) const;

    std::span<const float> row(std::int64_t i) const
    {
        return std::span<const float>(data).subspan(static_cast<std::size_t>(i * n_bins),
                                                     static_cast<std::size_t>(n_bins));
    }
    std::span<float> row(std::int64_t i)
    {
        return std::span<float>(data).subspan(static_cast<std::size_t>(i * n_bins), static_cast<std::size_t>(n_bins));
    }

    GridView view() const { return {n_angles, n_bins, data}; }

    void validate() const;

    bool operator==(const Sinogram&) const = default;
};

/// Angle i of n evenly spaced views. Written so that view 4i of 4n equals view
/// i of n bit for bit.
double view_angle_deg(double start_deg, double range_deg, std::int64_t i, std::int64_t n);

} // namespace sinterp
