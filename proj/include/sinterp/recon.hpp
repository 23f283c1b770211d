#pragma once

#include "sinterp/image.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace sinterp {

struct ReconConfig
{
    std::int64_t n_subsets = 4;
    std::int64_t n_iterations = 20;
    /// Stop early once the relative L1 change of a full iteration drops
    /// below this; 0 disables.
    double epsilon = 0.0;
    /// Reconstruction grid is image_size x image_size; 0 means n_bins.
    std::int64_t image_size = 0;
    double pixel_size = 1.0;
    double fov_fraction = 0.48;
    double step = 0.5;

    void validate() const;
};

/// Called after every full iteration with the 1-based iteration number and
/// the current estimate (width*height, row-major).
using ReconObserver = std::function<void(std::int64_t, std::span<const double>)>;

/// Ordered-subset EM:
///
///   x_j <- x_j / (sum_{i in S} a_ij) * sum_{i in S} a_ij y_i / (A x)_i
///
/// with subset k holding views k, k + n_subsets, ... in that order. Starts
/// from 1 inside the FOV circle and 0 outside. Where (A x)_i <= 1e-12 the
/// ratio is taken as 0, and pixels with zero subset sensitivity are set to 0.
/// Rejects negative data and n_subsets that do not divide the view count.
Image osem(const Sinogram& sino, const ReconConfig& cfg, const ReconObserver& observer = {});

/// osem with one subset.
Image mlem(const Sinogram& sino, std::int64_t n_iterations, const ReconObserver& observer = {});

} // namespace sinterp
