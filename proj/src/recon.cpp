#include "sinterp/recon.hpp"

#include "sinterp/error.hpp"
#include "sinterp/phantom.hpp"
#include "sinterp/projector.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sinterp {

namespace {
constexpr double kRatioGuard = 1e-12;
}

void ReconConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("ReconConfig: " + msg); };
    if (n_subsets < 1)
        fail("n_subsets must be positive, got " + std::to_string(n_subsets));
    if (n_iterations < 1)
        fail("n_iterations must be positive, got " + std::to_string(n_iterations));
    if (!(epsilon >= 0.0))
        fail("epsilon must be nonnegative");
    if (image_size < 0)
        fail("image_size must be positive (or 0 for the bin count)");
    if (!(pixel_size > 0.0) || !(fov_fraction > 0.0) || !(step > 0.0 && step <= 0.5))
        fail("pixel_size, fov_fraction and step must be positive (step <= 0.5)");
}

Image osem(const Sinogram& sino, const ReconConfig& cfg, const ReconObserver& observer)
{
    cfg.validate();
    try {
        sino.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("osem: ") + e.what());
    }
    if (sino.n_angles % cfg.n_subsets)
        throw ValidationError("osem: " + std::to_string(cfg.n_subsets) + " subsets do not divide "
                              + std::to_string(sino.n_angles) + " views");

    const auto n = cfg.image_size ? cfg.image_size : sino.n_bins;
    Image out = Image::zeros(n, n, cfg.pixel_size);
    const auto npix = static_cast<std::size_t>(n * n);

    struct Subset
    {
        std::shared_ptr<const SystemMatrix> a;
        std::vector<double> y;
        std::vector<double> sensitivity;
    };
    std::vector<Subset> subsets;
    for (std::int64_t k = 0; k < cfg.n_subsets; ++k) {
        std::vector<double> angles;
        Subset s;
        for (std::int64_t v = k; v < sino.n_angles; v += cfg.n_subsets) {
            angles.push_back(sino.angle_deg(v));
            const auto row = sino.row(v);
            s.y.insert(s.y.end(), row.begin(), row.end());
        }
        s.a = system_matrix(n, n, cfg.pixel_size, angles, sino.n_bins, sino.bin_width, cfg.step);
        s.sensitivity = s.a->sensitivity();
        subsets.push_back(std::move(s));
    }

    std::vector<double> x(npix, 0.0);
    const double radius = cfg.fov_fraction * static_cast<double>(n) * cfg.pixel_size;
    for (std::int64_t row = 0; row < n; ++row)
        for (std::int64_t col = 0; col < n; ++col)
            if (inside_fov(out, row, col, radius))
                x[static_cast<std::size_t>(row * n + col)] = 1.0;

    std::vector<double> prev;
    for (std::int64_t it = 1; it <= cfg.n_iterations; ++it) {
        if (cfg.epsilon > 0.0)
            prev = x;
        for (const auto& s : subsets) {
            std::vector<double> ax(s.y.size()), ratio(s.y.size()), back(npix);
            s.a->forward(x, ax);
            for (std::size_t i = 0; i < ax.size(); ++i)
                ratio[i] = ax[i] > kRatioGuard ? s.y[i] / ax[i] : 0.0;
            s.a->back(ratio, back);
            for (std::size_t j = 0; j < npix; ++j)
                x[j] = s.sensitivity[j] > 0.0 ? x[j] * back[j] / s.sensitivity[j] : 0.0;
        }
        if (observer)
            observer(it, x);
        if (cfg.epsilon > 0.0) {
            double diff = 0.0, norm = 0.0;
            for (std::size_t j = 0; j < npix; ++j) {
                diff += std::fabs(x[j] - prev[j]);
                norm += std::fabs(prev[j]);
            }
            if (norm > 0.0 && diff / norm < cfg.epsilon)
                break;
        }
    }
    for (std::size_t j = 0; j < npix; ++j)
        out.data[j] = static_cast<float>(x[j]);
    return out;
}

Image mlem(const Sinogram& sino, std::int64_t n_iterations, const ReconObserver& observer)
{
    ReconConfig cfg;
    cfg.n_subsets = 1;
    cfg.n_iterations = n_iterations;
    return osem(sino, cfg, observer);
}

} // namespace sinterp
