#pragma once

// Parallel-beam forward projector.
//
// Each ray is sampled at points symmetric about its closest approach to the
// rotation centre, `step` pixels apart, and the image is read by bilinear
// interpolation (pixels outside the grid are zero). For a view at angle
// theta and detector offset s, sample t is at
//
//   s * (cos theta, sin theta) + t * (-sin theta, cos theta)
//
// with bin b at s = (b - n_bins/2 + 0.5) * bin_width. The line integral is the
// sum of samples times step, in the units of pixel_size.
//
// The weights are assembled once into a sparse system matrix A. Projection is
// y = A x and backprojection x = A^T y over the same stored weights, so the
// pair is an exact adjoint.

#include "sinterp/image.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace sinterp {

struct ProjectionGeometry
{
    std::int64_t n_angles = 128;
    std::int64_t n_bins = 0; // 0: image width
    double start_angle_deg = 0.0;
    double angular_range_deg = 360.0;
    double bin_width = 1.0;
    double step = 0.5; // along the ray, in pixels

    void validate() const;
};

class SystemMatrix
{
public:
    /// Rays ordered view-major: row = view * n_bins + bin.
    SystemMatrix(std::int64_t width, std::int64_t height, double pixel_size, std::vector<double> angles_deg,
                 std::int64_t n_bins, double bin_width, double step);

    std::int64_t rows() const noexcept { return static_cast<std::int64_t>(row_ptr_.size()) - 1; }
    std::int64_t cols() const noexcept { return width_ * height_; }
    std::int64_t nnz() const noexcept { return static_cast<std::int64_t>(weights_.size()); }
    std::int64_t n_bins() const noexcept { return n_bins_; }
    const std::vector<double>& angles_deg() const noexcept { return angles_; }

    /// y = A x. Parallel over rays; each ray sums its pixels in ascending order.
    void forward(std::span<const double> x, std::span<double> y) const;
    /// x = A^T y. Parallel over pixels; each pixel sums its rays in ascending order.
    void back(std::span<const double> y, std::span<double> x) const;

    /// Row sums of A^T, i.e. A^T 1.
    std::vector<double> sensitivity() const;

private:
    std::int64_t width_, height_, n_bins_;
    std::vector<double> angles_;
    // CSR over rays.
    std::vector<std::int64_t> row_ptr_;
    std::vector<std::int32_t> col_idx_;
    std::vector<float> weights_;
    // Same entries, CSC over pixels.
    std::vector<std::int64_t> col_ptr_;
    std::vector<std::int32_t> row_idx_;
    std::vector<float> col_weights_;
};

/// Shared matrix for the given image grid and views; built on first use and
/// cached for the life of the process.
std::shared_ptr<const SystemMatrix> system_matrix(std::int64_t width, std::int64_t height, double pixel_size,
                                                  const std::vector<double>& angles_deg, std::int64_t n_bins,
                                                  double bin_width, double step);

/// Views of `geometry` as angles in degrees.
std::vector<double> view_angles(const ProjectionGeometry& geometry);

/// Sinogram of `image`, n_angles x n_bins, with the geometry attached.
Sinogram project(const Image& image, const ProjectionGeometry& geometry);

namespace reference {

/// Serial ray march straight from the image, no matrix.
Sinogram project(const Image& image, const ProjectionGeometry& geometry);

/// Serial adjoint of `project`, scattering ray by ray. Returns width*height
/// values.
std::vector<double> backproject(const Sinogram& sinogram, std::int64_t width, std::int64_t height,
                                double pixel_size, double step = 0.5);

} // namespace reference

} // namespace sinterp
