#include "sinterp/projector.hpp"

#include "ray.hpp"
#include "sinterp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>

namespace sinterp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Entry
{
    std::int32_t pixel;
    double weight;
};

} // namespace

void ProjectionGeometry::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("ProjectionGeometry: " + msg); };
    if (n_angles < 1)
        fail("n_angles must be positive, got " + std::to_string(n_angles));
    if (n_bins < 0)
        fail("n_bins must be positive (or 0 for the image width)");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
        fail("bin_width must be positive");
    if (!(step > 0.0 && step <= 0.5))
        fail("step must be in (0, 0.5] pixels, got " + std::to_string(step));
    if (!std::isfinite(start_angle_deg) || !std::isfinite(angular_range_deg) || angular_range_deg <= 0.0)
        fail("angular range must be positive and finite");
}

SystemMatrix::SystemMatrix(std::int64_t width, std::int64_t height, double pixel_size, std::vector<double> angles_deg,
                           std::int64_t n_bins, double bin_width, double step)
    : width_(width), height_(height), n_bins_(n_bins), angles_(std::move(angles_deg))
{
    if (width < 1 || height < 1 || n_bins < 1 || angles_.empty())
        throw ValidationError("SystemMatrix: grid, bins and views must be non-empty");
    if (width * height > std::numeric_limits<std::int32_t>::max())
        throw ValidationError("SystemMatrix: image too large");

    const detail::RayGrid grid{width, height, pixel_size, step};
    const auto n_rays = static_cast<std::int64_t>(angles_.size()) * n_bins;
    std::vector<std::vector<Entry>> per_ray(static_cast<std::size_t>(n_rays));

#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t r = 0; r < n_rays; ++r) {
        const double theta = angles_[static_cast<std::size_t>(r / n_bins)] * kDegToRad;
        const double s = detail::detector_offset(r % n_bins, n_bins, bin_width);
        auto& entries = per_ray[static_cast<std::size_t>(r)];
        detail::walk_ray(grid, std::cos(theta), std::sin(theta), s, [&](std::int64_t pixel, double w) {
            entries.push_back({static_cast<std::int32_t>(pixel), w});
        });
        // stable_sort keeps sample order within a pixel, so merged sums are
        // reproducible.
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.pixel < b.pixel; });
        std::size_t out = 0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (out > 0 && entries[out - 1].pixel == entries[i].pixel)
                entries[out - 1].weight += entries[i].weight;
            else
                entries[out++] = entries[i];
        }
        entries.resize(out);
    }

    row_ptr_.assign(static_cast<std::size_t>(n_rays + 1), 0);
    for (std::int64_t r = 0; r < n_rays; ++r)
        row_ptr_[static_cast<std::size_t>(r + 1)]
            = row_ptr_[static_cast<std::size_t>(r)] + static_cast<std::int64_t>(per_ray[static_cast<std::size_t>(r)].size());
    const auto total = static_cast<std::size_t>(row_ptr_.back());
    col_idx_.resize(total);
    weights_.resize(total);
    col_ptr_.assign(static_cast<std::size_t>(width * height + 1), 0);
    for (std::int64_t r = 0; r < n_rays; ++r) {
        auto& entries = per_ray[static_cast<std::size_t>(r)];
        auto pos = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(r)]);
        for (const auto& e : entries) {
            col_idx_[pos] = e.pixel;
            weights_[pos] = static_cast<float>(e.weight);
            ++col_ptr_[static_cast<std::size_t>(e.pixel) + 1];
            ++pos;
        }
        std::vector<Entry>().swap(entries);
    }

    for (std::size_t j = 0; j + 1 < col_ptr_.size(); ++j)
        col_ptr_[j + 1] += col_ptr_[j];
    row_idx_.resize(total);
    col_weights_.resize(total);
    std::vector<std::int64_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::int64_t r = 0; r < n_rays; ++r) {
        for (auto k = row_ptr_[static_cast<std::size_t>(r)]; k < row_ptr_[static_cast<std::size_t>(r + 1)]; ++k) {
            const auto j = static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)]);
            const auto dst = static_cast<std::size_t>(fill[j]++);
            row_idx_[dst] = static_cast<std::int32_t>(r);
            col_weights_[dst] = weights_[static_cast<std::size_t>(k)];
        }
    }
}

void SystemMatrix::forward(std::span<const double> x, std::span<double> y) const
{
    if (static_cast<std::int64_t>(x.size()) != cols() || static_cast<std::int64_t>(y.size()) != rows())
        throw ShapeError("SystemMatrix::forward: expected " + std::to_string(cols()) + " pixels and "
                         + std::to_string(rows()) + " rays");
    const auto n = rows();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
        double acc = 0.0;
        const auto end = row_ptr_[static_cast<std::size_t>(r + 1)];
        for (auto k = row_ptr_[static_cast<std::size_t>(r)]; k < end; ++k)
            acc += static_cast<double>(weights_[static_cast<std::size_t>(k)])
                   * x[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
        y[static_cast<std::size_t>(r)] = acc;
    }
}

void SystemMatrix::back(std::span<const double> y, std::span<double> x) const
{
    if (static_cast<std::int64_t>(x.size()) != cols() || static_cast<std::int64_t>(y.size()) != rows())
        throw ShapeError("SystemMatrix::back: expected " + std::to_string(rows()) + " rays and "
                         + std::to_string(cols()) + " pixels");
    const auto n = cols();
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        const auto end = col_ptr_[static_cast<std::size_t>(j + 1)];
        for (auto k = col_ptr_[static_cast<std::size_t>(j)]; k < end; ++k)
            acc += static_cast<double>(col_weights_[static_cast<std::size_t>(k)])
                   * y[static_cast<std::size_t>(row_idx_[static_cast<std::size_t>(k)])];
        x[static_cast<std::size_t>(j)] = acc;
    }
}

std::vector<double> SystemMatrix::sensitivity() const
{
    std::vector<double> ones(static_cast<std::size_t>(rows()), 1.0), out(static_cast<std::size_t>(cols()));
    back(ones, out);
    return out;
}

std::shared_ptr<const SystemMatrix> system_matrix(std::int64_t width, std::int64_t height, double pixel_size,
                                                  const std::vector<double>& angles_deg, std::int64_t n_bins,
                                                  double bin_width, double step)
{
    using Key = std::tuple<std::int64_t, std::int64_t, double, std::vector<double>, std::int64_t, double, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const SystemMatrix>> cache;
    constexpr std::size_t kMaxEntries = 24;

    Key key{width, height, pixel_size, angles_deg, n_bins, bin_width, step};
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
    }
    auto built = std::make_shared<const SystemMatrix>(width, height, pixel_size, angles_deg, n_bins, bin_width, step);
    std::lock_guard lock(mutex);
    if (cache.size() >= kMaxEntries)
        cache.clear();
    return cache.emplace(std::move(key), std::move(built)).first->second;
}

std::vector<double> view_angles(const ProjectionGeometry& geometry)
{
    std::vector<double> angles(static_cast<std::size_t>(geometry.n_angles));
    for (std::int64_t i = 0; i < geometry.n_angles; ++i)
        angles[static_cast<std::size_t>(i)]
            = view_angle_deg(geometry.start_angle_deg, geometry.angular_range_deg, i, geometry.n_angles);
    return angles;
}

namespace {

Sinogram empty_sinogram(const Image& image, const ProjectionGeometry& geometry)
{
    image.validate();
    geometry.validate();
    const auto bins = geometry.n_bins ? geometry.n_bins : image.width;
    return Sinogram::zeros(geometry.n_angles, bins, geometry.start_angle_deg, geometry.angular_range_deg,
                           geometry.bin_width);
}

} // namespace

Sinogram project(const Image& image, const ProjectionGeometry& geometry)
{
    Sinogram out = empty_sinogram(image, geometry);
    const auto a = system_matrix(image.width, image.height, image.pixel_size, view_angles(geometry), out.n_bins,
                                 geometry.bin_width, geometry.step);
    std::vector<double> x(image.data.begin(), image.data.end());
    std::vector<double> y(static_cast<std::size_t>(a->rows()));
    a->forward(x, y);
    for (std::size_t i = 0; i < y.size(); ++i)
        out.data[i] = static_cast<float>(y[i]);
    return out;
}

namespace reference {

Sinogram project(const Image& image, const ProjectionGeometry& geometry)
{
    Sinogram out = empty_sinogram(image, geometry);
    const detail::RayGrid grid{image.width, image.height, image.pixel_size, geometry.step};
    for (std::int64_t v = 0; v < out.n_angles; ++v) {
        const double theta = out.angle_deg(v) * kDegToRad;
        const double c = std::cos(theta), sn = std::sin(theta);
        for (std::int64_t b = 0; b < out.n_bins; ++b) {
            double acc = 0.0;
            detail::walk_ray(grid, c, sn, detail::detector_offset(b, out.n_bins, geometry.bin_width),
                             [&](std::int64_t pixel, double w) {
                                 acc += w * static_cast<double>(image.data[static_cast<std::size_t>(pixel)]);
                             });
            out.row(v)[static_cast<std::size_t>(b)] = static_cast<float>(acc);
        }
    }
    return out;
}

std::vector<double> backproject(const Sinogram& sinogram, std::int64_t width, std::int64_t height,
                                double pixel_size, double step)
{
    std::vector<double> out(static_cast<std::size_t>(width * height), 0.0);
    const detail::RayGrid grid{width, height, pixel_size, step};
    for (std::int64_t v = 0; v < sinogram.n_angles; ++v) {
        const double theta = sinogram.angle_deg(v) * kDegToRad;
        const double c = std::cos(theta), sn = std::sin(theta);
        for (std::int64_t b = 0; b < sinogram.n_bins; ++b) {
            const double y = sinogram.row(v)[static_cast<std::size_t>(b)];
            detail::walk_ray(grid, c, sn, detail::detector_offset(b, sinogram.n_bins, sinogram.bin_width),
                             [&](std::int64_t pixel, double w) { out[static_cast<std::size_t>(pixel)] += w * y; });
        }
    }
    return out;
}

} // namespace reference

} // namespace sinterp
