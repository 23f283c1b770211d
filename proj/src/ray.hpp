#pragma once

// Bilinear ray sampler shared by the system-matrix builder and the serial
// reference projector.

#include <cmath>
#include <cstdint>

namespace sinterp::detail {

struct RayGrid
{
    std::int64_t width;
    std::int64_t height;
    double pixel_size;
    double step; // pixels
};

inline double detector_offset(std::int64_t bin, std::int64_t n_bins, double bin_width)
{
    return (static_cast<double>(bin) - 0.5 * static_cast<double>(n_bins) + 0.5) * bin_width;
}

// Calls visit(pixel, weight) for every bilinear tap of every sample on the
// ray at detector offset `s` (same units as pixel_size) of a view with
// direction cosines (c, sn). Taps off the grid are skipped.
template <class Visit>
void walk_ray(const RayGrid& g, double c, double sn, double s, Visit&& visit)
{
    const double hw = 0.5 * static_cast<double>(g.width), hh = 0.5 * static_cast<double>(g.height);
    const double reach = std::sqrt((hw + 1.0) * (hw + 1.0) + (hh + 1.0) * (hh + 1.0));
    const auto half = static_cast<std::int64_t>(std::ceil(reach / g.step));
    const double sp = s / g.pixel_size;
    const double weight = g.step * g.pixel_size;
    for (std::int64_t k = -half; k <= half; ++k) {
        const double t = static_cast<double>(k) * g.step;
        const double col = sp * c - t * sn + hw - 0.5;
        const double row = hh - 0.5 - (sp * sn + t * c);
        const double fj = std::floor(col), fi = std::floor(row);
        if (fj < -1.0 || fi < -1.0 || fj >= static_cast<double>(g.width) || fi >= static_cast<double>(g.height))
            continue;
        const auto j0 = static_cast<std::int64_t>(fj), i0 = static_cast<std::int64_t>(fi);
        const double ax = col - fj, ay = row - fi;
        const double w00 = (1.0 - ay) * (1.0 - ax), w01 = (1.0 - ay) * ax;
        const double w10 = ay * (1.0 - ax), w11 = ay * ax;
        const bool j0_in = j0 >= 0, j1_in = j0 + 1 < g.width;
        if (i0 >= 0) {
            if (j0_in && w00 != 0.0)
                visit(i0 * g.width + j0, weight * w00);
            if (j1_in && w01 != 0.0)
                visit(i0 * g.width + j0 + 1, weight * w01);
        }
        if (i0 + 1 < g.height) {
            if (j0_in && w10 != 0.0)
                visit((i0 + 1) * g.width + j0, weight * w10);
            if (j1_in && w11 != 0.0)
                visit((i0 + 1) * g.width + j0 + 1, weight * w11);
        }
    }
}

} // namespace sinterp::detail
