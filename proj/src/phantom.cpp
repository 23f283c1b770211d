#include "sinterp/phantom.hpp"

#include "sinterp/error.hpp"
#include "sinterp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace sinterp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kMaxAttempts = 16;

struct Blob
{
    double cx, cy, sigma, amplitude;
};

// Precomputed rotation for the inside test.
struct PreparedEllipse
{
    double cx, cy, inv_a2, inv_b2, c, s, value;

    explicit PreparedEllipse(const Ellipse& e)
        : cx(e.cx), cy(e.cy), inv_a2(1.0 / (e.a * e.a)), inv_b2(1.0 / (e.b * e.b)),
          c(std::cos(e.angle_deg * kDegToRad)), s(std::sin(e.angle_deg * kDegToRad)), value(e.value)
    {
    }

    bool contains(double x, double y) const
    {
        const double dx = x - cx, dy = y - cy;
        const double u = dx * c + dy * s;
        const double v = -dx * s + dy * c;
        return u * u * inv_a2 + v * v * inv_b2 <= 1.0;
    }
};

double pixel_x(std::int64_t col, std::int64_t width) { return static_cast<double>(col) + 0.5 - 0.5 * width; }
double pixel_y(std::int64_t row, std::int64_t height) { return 0.5 * height - static_cast<double>(row) - 0.5; }

// Uniform point in a disk of radius r.
std::pair<double, double> disk_point(Rng& rng, double r)
{
    const double rho = r * std::sqrt(rng.uniform());
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    return {rho * std::cos(phi), rho * std::sin(phi)};
}

std::vector<double> draw_phantom(const PhantomRecipe& recipe, Rng& rng)
{
    const double fov = recipe.fov_radius();
    const double center_radius = recipe.center_fraction * fov;

    std::vector<PreparedEllipse> ellipses;
    const auto n_ellipses = rng.uniform_int(recipe.min_ellipses, recipe.max_ellipses);
    for (std::int64_t k = 0; k < n_ellipses; ++k) {
        const auto [cx, cy] = disk_point(rng, center_radius);
        const double a = rng.uniform(recipe.min_semi_axis, recipe.max_semi_axis);
        const double b = rng.uniform(recipe.min_semi_axis, recipe.max_semi_axis);
        const double angle = rng.uniform(0.0, 180.0);
        const double value = rng.uniform(recipe.min_intensity, recipe.max_intensity);
        ellipses.emplace_back(Ellipse{cx, cy, a, b, angle, value});
    }
    std::vector<Blob> blobs;
    const auto n_blobs = rng.uniform_int(recipe.min_blobs, recipe.max_blobs);
    for (std::int64_t k = 0; k < n_blobs; ++k) {
        const auto [cx, cy] = disk_point(rng, center_radius);
        const double sigma = rng.uniform(recipe.min_sigma, recipe.max_sigma);
        const double amplitude = rng.uniform(recipe.min_intensity, recipe.max_intensity);
        blobs.push_back({cx, cy, sigma, amplitude});
    }

    const auto n = recipe.size;
    std::vector<double> out(static_cast<std::size_t>(n * n), 0.0);
    const double fov2 = fov * fov;
    for (std::int64_t row = 0; row < n; ++row) {
        const double y = pixel_y(row, n);
        for (std::int64_t col = 0; col < n; ++col) {
            const double x = pixel_x(col, n);
            if (x * x + y * y >= fov2)
                continue;
            double v = 0.0;
            for (const auto& e : ellipses)
                if (e.contains(x, y))
                    v += e.value;
            for (const auto& g : blobs) {
                const double dx = x - g.cx, dy = y - g.cy;
                v += g.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * g.sigma * g.sigma));
            }
            out[static_cast<std::size_t>(row * n + col)] = v;
        }
    }
    return out;
}

} // namespace

const std::array<Ellipse, 10>& shepp_logan_table()
{
    static const std::array<Ellipse, 10> table{{
        {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
        {0.22, 0.0, 0.11, 0.31, -18.0, -0.02},
        {-0.22, 0.0, 0.16, 0.41, 18.0, -0.02},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
        {0.0, -0.605, 0.023, 0.023, 0.0, 0.01},
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
    }};
    return table;
}

Image render_ellipses(std::span<const Ellipse> ellipses, std::int64_t n, int supersample)
{
    if (n < 1 || supersample < 1)
        throw ValidationError("render_ellipses: size and supersampling must be positive");
    std::vector<PreparedEllipse> prepared(ellipses.begin(), ellipses.end());
    Image img = Image::zeros(n, n);
    const double half = 0.5 * static_cast<double>(n);
    const double inv_ss = 1.0 / supersample;
    for (std::int64_t row = 0; row < n; ++row) {
        for (std::int64_t col = 0; col < n; ++col) {
            double acc = 0.0;
            for (int si = 0; si < supersample; ++si) {
                // Offsets symmetric about the pixel centre keep mirror symmetry exact.
                const double y = (pixel_y(row, n) + (0.5 - (si + 0.5) * inv_ss)) / half;
                for (int sj = 0; sj < supersample; ++sj) {
                    const double x = (pixel_x(col, n) + ((sj + 0.5) * inv_ss - 0.5)) / half;
                    double v = 0.0;
                    for (const auto& e : prepared)
                        if (e.contains(x, y))
                            v += e.value;
                    acc += std::max(v, 0.0);
                }
            }
            img.at(row, col) = static_cast<float>(acc * inv_ss * inv_ss);
        }
    }
    return img;
}

Image shepp_logan(std::int64_t n)
{
    if (n < 16)
        throw ValidationError("shepp_logan: size must be at least 16, got " + std::to_string(n));
    Image img = render_ellipses(shepp_logan_table(), n);
    const float peak = *std::max_element(img.data.begin(), img.data.end());
    for (auto& v : img.data)
        v /= peak;
    return img;
}

void PhantomRecipe::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("PhantomRecipe: " + msg); };
    if (size < 16)
        fail("size must be at least 16");
    if (!(fov_fraction > 0.0 && fov_fraction <= 0.5))
        fail("fov_fraction must be in (0, 0.5]");
    if (min_ellipses < 1 || max_ellipses < min_ellipses)
        fail("ellipse count range is empty or allows zero ellipses");
    if (min_blobs < 0 || max_blobs < min_blobs)
        fail("blob count range is invalid");
    if (!(center_fraction >= 0.0 && center_fraction < 1.0))
        fail("center_fraction must be in [0, 1)");
    if (!(min_semi_axis > 0.0 && max_semi_axis >= min_semi_axis))
        fail("semi-axis range is invalid");
    if (!(min_intensity > 0.0 && max_intensity >= min_intensity))
        fail("intensity range is invalid");
    if (!(min_sigma > 0.0 && max_sigma >= min_sigma))
        fail("sigma range is invalid");
}

Image generate_phantom(const PhantomRecipe& recipe, std::uint64_t index)
{
    recipe.validate();
    const auto item_seed = derive_seed(recipe.seed, Stream::Phantom, index);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(attempt == 0 ? item_seed : derive_seed(item_seed, 0, static_cast<std::uint64_t>(attempt)));
        auto values = draw_phantom(recipe, rng);
        const double peak = *std::max_element(values.begin(), values.end());
        if (!(peak > 0.0) || !std::isfinite(peak))
            continue;
        Image img = Image::zeros(recipe.size, recipe.size);
        for (std::size_t i = 0; i < values.size(); ++i)
            img.data[i] = static_cast<float>(values[i] / peak);
        return img;
    }
    // Centres lie well inside the FOV and semi-axes are at least one pixel
    // wide, so an empty draw needs a pathological recipe.
    throw ValidationError("generate_phantom: no valid draw after " + std::to_string(kMaxAttempts) + " attempts");
}

bool inside_fov(const Image& image, std::int64_t row, std::int64_t col, double radius)
{
    const double x = pixel_x(col, image.width) * image.pixel_size;
    const double y = pixel_y(row, image.height) * image.pixel_size;
    return x * x + y * y < radius * radius;
}

} // namespace sinterp
