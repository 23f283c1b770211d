#include "sinterp/error.hpp"
#include "sinterp/metrics.hpp"
#include "sinterp/phantom.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sinterp;

namespace {

struct Grid
{
    std::int64_t rows, cols;
    std::vector<float> data;
    GridView view() const { return {rows, cols, data}; }
};

Grid random_grid(std::int64_t rows, std::int64_t cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Grid g{rows, cols, std::vector<float>(static_cast<std::size_t>(rows * cols))};
    for (auto& v : g.data)
        v = u(rng);
    return g;
}

Grid transposed(const Grid& g)
{
    Grid t{g.cols, g.rows, std::vector<float>(g.data.size())};
    for (std::int64_t r = 0; r < g.rows; ++r)
        for (std::int64_t c = 0; c < g.cols; ++c)
            t.data[static_cast<std::size_t>(c * g.rows + r)] = g.data[static_cast<std::size_t>(r * g.cols + c)];
    return t;
}

Grid flipped_lr(const Grid& g)
{
    Grid f = g;
    for (std::int64_t r = 0; r < g.rows; ++r)
        for (std::int64_t c = 0; c < g.cols; ++c)
            f.data[static_cast<std::size_t>(r * g.cols + c)] = g.data[static_cast<std::size_t>(r * g.cols + g.cols - 1 - c)];
    return f;
}

} // namespace

TEST(Mse, IdenticalInputsGiveZeroAndInfinitePsnr)
{
    const auto g = random_grid(8, 8, 1);
    EXPECT_EQ(mse(g.view(), g.view()), 0.0);
    EXPECT_TRUE(std::isinf(psnr(g.view(), g.view())));
}

TEST(Psnr, HundredthMseIsTwentyDecibels)
{
    // Constant offset of 0.1 everywhere.
    const Grid a{1, 4, {0.0f, 0.25f, 0.5f, 0.75f}};
    Grid b = a;
    for (auto& v : b.data)
        v += 0.1f;
    EXPECT_NEAR(mse(a.view(), b.view()), 0.01, 1e-8);
    EXPECT_NEAR(psnr(a.view(), b.view()), 20.0, 1e-5);
}

TEST(Psnr, TableMseAndPsnrAreConsistent)
{
    // High-noise row of the denoising table: MSE 0.0018 printed with four
    // decimals, PSNR 27.51 dB. 10 log10(1 / 0.0018) = 27.45.
    const double from_mse = 10.0 * std::log10(1.0 / 0.0018);
    EXPECT_NEAR(from_mse, 27.45, 0.005);
    EXPECT_NEAR(from_mse, 27.51, 0.1);
}

TEST(Psnr, DecreasesAsNoiseGrows)
{
    const auto ref = random_grid(32, 32, 2);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> z(ref.data.size());
    for (auto& v : z)
        v = n01(rng);
    double last = std::numeric_limits<double>::infinity();
    for (double sigma : {0.001, 0.01, 0.03, 0.1, 0.3}) {
        Grid est = ref;
        for (std::size_t i = 0; i < z.size(); ++i)
            est.data[i] = static_cast<float>(ref.data[i] + sigma * z[i]);
        const double p = psnr(ref.view(), est.view());
        EXPECT_LT(p, last) << "sigma " << sigma;
        last = p;
    }
}

TEST(Mse, ShapeMismatchIsRejected)
{
    const auto a = random_grid(4, 4, 1), b = random_grid(4, 5, 1);
    EXPECT_THROW(mse(a.view(), b.view()), ShapeError);
}

TEST(Mape, TenPercentExample)
{
    const Grid ref{1, 3, {1.0f, 2.0f, 4.0f}}, est{1, 3, {1.1f, 1.8f, 4.4f}};
    const auto m = mape(ref.view(), est.view());
    EXPECT_NEAR(m.percent, 10.0, 1e-5);
    EXPECT_EQ(m.masked, 0);
    EXPECT_EQ(mape(ref.view(), ref.view()).percent, 0.0);
}

TEST(Mape, ZeroReferenceBinsAreMasked)
{
    const Grid ref{1, 2, {0.0f, 1.0f}}, est{1, 2, {5.0f, 1.0f}};
    const auto m = mape(ref.view(), est.view());
    EXPECT_EQ(m.percent, 0.0);
    EXPECT_EQ(m.masked, 1);
    const Grid zero{1, 2, {0.0f, 0.0f}};
    EXPECT_THROW(mape(zero.view(), est.view()), ValidationError);
}

TEST(Ssim, SelfSimilarityIsExactlyOne)
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto g = random_grid(20, 27, seed);
        EXPECT_EQ(ssim(g.view(), g.view()), 1.0);
        EXPECT_EQ(reference::ssim(g.view(), g.view()), 1.0);
    }
    const Image sl = shepp_logan(64);
    EXPECT_EQ(ssim(sl.view(), sl.view()), 1.0);
}

TEST(Ssim, ConstantImagesClosedForm)
{
    const Grid x{16, 16, std::vector<float>(256, 0.5f)}, y{16, 16, std::vector<float>(256, 0.6f)};
    const double c1 = 1e-4;
    const double expected = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
    EXPECT_NEAR(ssim(x.view(), y.view()), expected, 1e-6);
    EXPECT_NEAR(expected, 0.98361, 1e-5);
}

TEST(Ssim, InvariantUnderSharedFlipAndTranspose)
{
    const auto a = random_grid(24, 30, 4), b = random_grid(24, 30, 5);
    const double s = ssim(a.view(), b.view());
    EXPECT_NEAR(ssim(flipped_lr(a).view(), flipped_lr(b).view()), s, 1e-12);
    EXPECT_NEAR(ssim(transposed(a).view(), transposed(b).view()), s, 1e-12);
    EXPECT_NEAR(ssim(b.view(), a.view()), s, 1e-12);
}

TEST(Metrics, TraversalOrderDoesNotMatter)
{
    const auto a = random_grid(16, 20, 6), b = random_grid(16, 20, 7);
    EXPECT_NEAR(mse(transposed(a).view(), transposed(b).view()), mse(a.view(), b.view()), 1e-15);
    EXPECT_NEAR(mape(transposed(a).view(), transposed(b).view()).percent, mape(a.view(), b.view()).percent, 1e-9);
}

TEST(Ssim, SeparableMatchesDirectWindows)
{
    const auto a = random_grid(40, 33, 8), b = random_grid(40, 33, 9);
    EXPECT_NEAR(ssim(a.view(), b.view()), reference::ssim(a.view(), b.view()), 1e-12);
}

TEST(Ssim, RejectsImagesSmallerThanTheWindow)
{
    const auto a = random_grid(10, 40, 1);
    EXPECT_THROW(ssim(a.view(), a.view()), ShapeError);
}

TEST(Score, NormalizesByReferencePeak)
{
    auto ref = random_grid(16, 16, 10);
    auto est = random_grid(16, 16, 11);
    const auto base = score(ref.view(), est.view());
    for (auto& v : ref.data)
        v *= 8.0f;
    for (auto& v : est.data)
        v *= 8.0f;
    const auto scaled = score(ref.view(), est.view());
    EXPECT_NEAR(scaled.mse, base.mse, 1e-9);
    EXPECT_NEAR(scaled.ssim, base.ssim, 1e-9);
    EXPECT_NEAR(scaled.mape, base.mape, 1e-6);
    EXPECT_LE(base.ssim, 1.0);
    EXPECT_GE(base.mape, 0.0);
}

TEST(Report, JsonAndTables)
{
    MetricsReport r;
    r.noise = "low";
    r.mape = 2.64;
    r.mse = 0.0006;
    r.ssim = 0.977;
    r.psnr = 32.51;
    const auto j = to_json(r);
    EXPECT_EQ(j["noise"], "low");
    EXPECT_DOUBLE_EQ(j["mse"].get<double>(), 0.0006);
    MetricsReport perfect;
    perfect.psnr = std::numeric_limits<double>::infinity();
    EXPECT_EQ(to_json(perfect)["psnr_db"], "inf");

    const auto table = denoising_table({r});
    EXPECT_NE(table.find("Noise"), std::string::npos);
    EXPECT_NE(table.find("Low"), std::string::npos);
    EXPECT_NE(table.find("2.64%"), std::string::npos);
    EXPECT_NE(table.find("32.51"), std::string::npos);

    const auto recon = reconstruction_table({r}, {r});
    EXPECT_NE(recon.find("Standard Method"), std::string::npos);
    EXPECT_NE(recon.find("Proposed Method"), std::string::npos);
}

TEST(Report, MeanSkipsInfinitePsnr)
{
    MetricsReport a, b;
    a.psnr = std::numeric_limits<double>::infinity();
    b.psnr = 30.0;
    a.ssim = 1.0;
    b.ssim = 0.5;
    const auto m = mean_report({a, b});
    EXPECT_EQ(m.psnr, 30.0);
    EXPECT_EQ(m.ssim, 0.75);
}
