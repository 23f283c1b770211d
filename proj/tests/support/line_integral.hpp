#pragma once

// Brute-force line integrals for checking the projector. Written against the
// geometry conventions only: pixel centres at (col + 0.5 - W/2, H/2 - row - 0.5),
// detector bin b at s = b - n/2 + 0.5, ray direction (-sin, cos).

#include "sinterp/image.hpp"

#include <cmath>
#include <numbers>

namespace sinterp::test_support {

// Bilinear interpolant of the pixel grid at (x, y); zero outside.
inline double bilinear(const Image& img, double x, double y)
{
    const double u = x + 0.5 * img.width - 0.5;
    const double v = 0.5 * img.height - 0.5 - y;
    const double fu = std::floor(u), fv = std::floor(v);
    double acc = 0.0;
    for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
            const auto i = static_cast<long>(fv) + di, j = static_cast<long>(fu) + dj;
            if (i < 0 || j < 0 || i >= img.height || j >= img.width)
                continue;
            const double w = (di ? v - fv : 1.0 - (v - fv)) * (dj ? u - fu : 1.0 - (u - fu));
            acc += w * img.at(i, j);
        }
    }
    return acc;
}

// Midpoint rule at spacing h over the whole grid diagonal.
inline double line_integral(const Image& img, double theta_deg, double s, double h = 0.01)
{
    const double th = theta_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th), sn = std::sin(th);
    const double half = std::hypot(0.5 * img.width + 1.0, 0.5 * img.height + 1.0);
    double acc = 0.0;
    for (double t = -half + 0.5 * h; t < half; t += h)
        acc += bilinear(img, s * c - t * sn, s * sn + t * c);
    return acc * h;
}

} // namespace sinterp::test_support
