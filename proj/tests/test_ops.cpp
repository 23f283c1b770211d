#include "sinterp/error.hpp"
#include "sinterp/kernels.hpp"
#include "sinterp/ops.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace sinterp;
using sinterp::test_support::gradcheck;
using sinterp::test_support::random_tensor;
using sinterp::test_support::random_tensor64;

namespace {

double inner(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Strided 2x2 convolution written directly from its definition:
// y[n,ci,i,j] = sum_co sum_di,dj x[n,co,sh*i+di,sw*j+dj] * w[ci,co,di,dj],
// taps outside x read as zero.
std::vector<double> strided_conv2x2(std::span<const double> x, std::span<const double> w, std::int64_t batch,
                                    std::int64_t cin, std::int64_t cout, std::int64_t h, std::int64_t wd,
                                    std::int64_t sh, std::int64_t sw)
{
    const std::int64_t xh = h * sh, xw = wd * sw;
    std::vector<double> y(static_cast<std::size_t>(batch * cin * h * wd), 0.0);
    for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t ci = 0; ci < cin; ++ci)
            for (std::int64_t i = 0; i < h; ++i)
                for (std::int64_t j = 0; j < wd; ++j) {
                    double acc = 0.0;
                    for (std::int64_t co = 0; co < cout; ++co)
                        for (std::int64_t di = 0; di < 2; ++di)
                            for (std::int64_t dj = 0; dj < 2; ++dj) {
                                const auto r = sh * i + di, c = sw * j + dj;
                                if (r < xh && c < xw)
                                    acc += x[((n * cout + co) * xh + r) * xw + c] * w[((ci * cout + co) * 2 + di) * 2 + dj];
                            }
                    y[((n * cin + ci) * h + i) * wd + j] = acc;
                }
    return y;
}

} // namespace

TEST(Conv2d, AllOnesThreeByThree)
{
    Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
    Tensor b = Tensor::zeros({1});
    auto y = conv2d(x, w, b);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
    EXPECT_FLOAT_EQ(y.data()[4], 9.0f);
    EXPECT_FLOAT_EQ(y.data()[0], 4.0f);
}

TEST(Conv2d, OneByOneIdentity)
{
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({2, 1, 5, 7}, rng);
    auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::zeros({1}));
    ASSERT_EQ(y.shape(), x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i)
        EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, ChannelMismatchNamesBothShapes)
{
    try {
        conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({3, 5, 3, 3}), Tensor::zeros({3}));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[1,2,4,4]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3,5,3,3]"), std::string::npos) << msg;
    }
}

TEST(Conv2d, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(11);
    auto x = random_tensor64({2, 3, 8, 8}, rng);
    auto w = random_tensor64({4, 3, 3, 3}, rng);
    auto b = random_tensor64({4}, rng);
    auto target = random_tensor64({2, 4, 8, 8}, rng);
    auto r = gradcheck([&](const std::vector<Tensor64>& in) { return mse_loss(conv2d(in[0], in[1], in[2]), target); },
                       {x, w, b});
    EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(Conv2d, PointwiseGradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(12);
    auto x = random_tensor64({2, 3, 4, 6}, rng);
    auto w = random_tensor64({2, 3, 1, 1}, rng);
    auto b = random_tensor64({2}, rng);
    auto target = random_tensor64({2, 2, 4, 6}, rng);
    auto r = gradcheck([&](const std::vector<Tensor64>& in) { return mse_loss(conv2d(in[0], in[1], in[2]), target); },
                       {x, w, b});
    EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(ConvTranspose2d, SinglePixelFillsKernel)
{
    auto y = conv_transpose2d(Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::full({1, 1, 2, 2}, 1.0f), Tensor::zeros({1}),
                              {2, 2});
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    for (float v : y.data())
        EXPECT_EQ(v, 1.0f);
}

TEST(ConvTranspose2d, AnisotropicStrideShape)
{
    auto y = conv_transpose2d(Tensor::full({1, 1, 2, 2}, 1.0f), Tensor::full({1, 1, 2, 2}, 1.0f), Tensor::zeros({1}),
                              {2, 1});
    EXPECT_EQ(y.shape(), (Shape{1, 1, 4, 2}));
}

TEST(ConvTranspose2d, RejectsStrideOutsideOneOrTwo)
{
    EXPECT_THROW(conv_transpose2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1}), {3, 2}),
                 ValidationError);
    EXPECT_THROW(conv_transpose2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1}), {2, 0}),
                 ValidationError);
}

TEST(ConvTranspose2d, GradientMatchesFiniteDifferences)
{
    for (Stride2d stride : {Stride2d{2, 2}, Stride2d{2, 1}, Stride2d{1, 1}}) {
        std::mt19937_64 rng(21 + stride.w);
        auto x = random_tensor64({2, 3, 4, 5}, rng);
        auto w = random_tensor64({3, 2, 2, 2}, rng);
        auto b = random_tensor64({2}, rng);
        auto target = random_tensor64({2, 2, 4 * stride.h, 5 * stride.w}, rng);
        auto r = gradcheck(
            [&](const std::vector<Tensor64>& in) { return mse_loss(conv_transpose2d(in[0], in[1], in[2], stride), target); },
            {x, w, b});
        EXPECT_LE(r.max_relative_error, 1e-4) << "stride " << stride.h << "," << stride.w;
    }
}

TEST(ConvTranspose2d, IsAdjointOfStridedConvolution)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::int64_t sh = 1 + trial % 2, sw = 1 + (trial / 2) % 2;
        const std::int64_t batch = 1 + trial % 3, cin = 1 + trial % 4, cout = 1 + (trial / 3) % 3;
        const std::int64_t h = 2 + trial % 5, wd = 3 + trial % 4;
        auto w = random_tensor64({cin, cout, 2, 2}, rng);
        auto y = random_tensor64({batch, cin, h, wd}, rng);
        auto x = random_tensor64({batch, cout, h * sh, wd * sw}, rng);
        auto conv_x = strided_conv2x2(x.data(), w.data(), batch, cin, cout, h, wd, sh, sw);
        auto convt_y = conv_transpose2d(y, w, Tensor64::zeros({cout}), {sh, sw});
        EXPECT_NEAR(inner(conv_x, y.data()), inner(x.data(), convt_y.data()), 1e-10) << "trial " << trial;
    }
}

TEST(AvgPool, TwoByTwoBlockMean)
{
    auto y = avgpool2x2(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_FLOAT_EQ(y.item(), 2.5f);
}

TEST(AvgPool, ConstantStaysConstant)
{
    auto y = avgpool2x2(Tensor::full({2, 3, 6, 10}, 0.7f));
    EXPECT_EQ(y.shape(), (Shape{2, 3, 3, 5}));
    for (float v : y.data())
        EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(AvgPool, GradientOfSumIsQuarter)
{
    Tensor64 x = Tensor64::full({1, 2, 4, 4}, 1.0);
    x.set_requires_grad(true);
    // mean of (pool(x) - (pool(x) - 1))^2 style trick is awkward; use mse
    // against zero and rescale: d/dx mean(p^2)/2 * N = p * dp/dx.
    auto pooled = avgpool2x2(x);
    auto loss = mse_loss(pooled, Tensor64::zeros(pooled.shape()));
    loss.backward();
    const double n = static_cast<double>(pooled.numel());
    for (double g : x.grad())
        EXPECT_DOUBLE_EQ(g * n / 2.0, 0.25);
}

TEST(AvgPool, OddExtentRejected)
{
    EXPECT_THROW(avgpool2x2(Tensor::zeros({1, 1, 3, 4})), ShapeError);
    EXPECT_THROW(avgpool2x2(Tensor::zeros({1, 1, 4, 5})), ShapeError);
}

TEST(AvgPool, PoolThenUpsamplePreservesMean)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_tensor64({1, 2, 2 * (1 + trial % 5), 2 * (1 + trial % 7)}, rng, 0.0, 3.0);
        auto y = upsample_nearest(avgpool2x2(x), 2, 2);
        const double mx = std::accumulate(x.data().begin(), x.data().end(), 0.0) / x.numel();
        const double my = std::accumulate(y.data().begin(), y.data().end(), 0.0) / y.numel();
        EXPECT_NEAR(mx, my, 1e-12);
    }
}

TEST(Relu, Values)
{
    auto y = relu(Tensor({2}, {-1.0f, 2.5f}));
    EXPECT_EQ(y.data()[0], 0.0f);
    EXPECT_EQ(y.data()[1], 2.5f);
}

TEST(Concat, StacksChannels)
{
    auto y = concat_channels(Tensor::full({1, 3, 8, 8}, 1.0f), Tensor::full({1, 5, 8, 8}, 2.0f));
    ASSERT_EQ(y.shape(), (Shape{1, 8, 8, 8}));
    EXPECT_EQ(y.data()[0], 1.0f);
    EXPECT_EQ(y.data()[3 * 64], 2.0f);
}

TEST(Concat, SpatialMismatchRejected)
{
    EXPECT_THROW(concat_channels(Tensor::zeros({1, 3, 8, 8}), Tensor::zeros({1, 5, 8, 4})), ShapeError);
    EXPECT_THROW(concat_channels(Tensor::zeros({2, 3, 8, 8}), Tensor::zeros({1, 5, 8, 8})), ShapeError);
}

TEST(Concat, GradientRoutesSlicesBack)
{
    std::mt19937_64 rng(2);
    auto a = random_tensor64({2, 1, 3, 2}, rng);
    auto b = random_tensor64({2, 2, 3, 2}, rng);
    auto target = random_tensor64({2, 3, 3, 2}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    mse_loss(concat_channels(a, b), target).backward();
    const double scale = 2.0 / static_cast<double>(target.numel());
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t p = 0; p < 6; ++p) {
                const auto out_idx = (n * 3 + c) * 6 + p;
                const double src = c == 0 ? a.data()[n * 6 + p] : b.data()[(n * 2 + c - 1) * 6 + p];
                const double expected = scale * (src - target.data()[out_idx]);
                const double got = c == 0 ? a.grad()[n * 6 + p] : b.grad()[(n * 2 + c - 1) * 6 + p];
                EXPECT_DOUBLE_EQ(got, expected);
            }
}

TEST(MseLoss, Values)
{
    EXPECT_FLOAT_EQ(mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {1, 4})).item(), 2.0f);
    EXPECT_FLOAT_EQ(mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {1, 2})).item(), 0.0f);
    EXPECT_THROW(mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(MseLoss, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(4);
    auto p = random_tensor64({3, 7}, rng);
    auto t = random_tensor64({3, 7}, rng);
    auto r = gradcheck([](const std::vector<Tensor64>& in) { return mse_loss(in[0], in[1]); }, {p, t});
    EXPECT_LE(r.max_relative_error, 1e-6);
}

TEST(Ops, PoolReluUpsampleConcatChainGradient)
{
    std::mt19937_64 rng(9);
    auto x = random_tensor64({2, 2, 4, 6}, rng);
    auto skip = random_tensor64({2, 1, 4, 6}, rng);
    auto target = random_tensor64({2, 3, 4, 6}, rng);
    auto r = gradcheck(
        [&](const std::vector<Tensor64>& in) {
            auto h = upsample_nearest(relu(avgpool2x2(in[0])), 2, 2);
            return mse_loss(concat_channels(h, in[1]), target);
        },
        {x, skip});
    EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(Ops, InputsAreNeverMutated)
{
    std::mt19937_64 rng(10);
    auto x = random_tensor({1, 2, 4, 4}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    const std::vector<float> before(x.data().begin(), x.data().end());
    w.set_requires_grad(true);
    auto y = relu(conv2d(x, w, b));
    auto z = conv_transpose2d(avgpool2x2(y), random_tensor({3, 1, 2, 2}, rng), Tensor::zeros({1}), {2, 2});
    mse_loss(z, Tensor::zeros(z.shape())).backward();
    EXPECT_TRUE(std::equal(before.begin(), before.end(), x.data().begin()));
}

TEST(Kernels, ParallelConvMatchesReference)
{
    std::mt19937_64 rng(31);
    for (std::int64_t k : {1, 3}) {
        const kernels::Conv2dDims d{2, 5, 7, 9, 13, k};
        auto x = random_tensor64({d.batch, d.in_channels, d.height, d.width}, rng);
        auto w = random_tensor64({d.out_channels, d.in_channels, k, k}, rng);
        auto b = random_tensor64({d.out_channels}, rng);
        auto dy = random_tensor64({d.batch, d.out_channels, d.height, d.width}, rng);
        std::vector<double> y1(dy.data().size()), y2(dy.data().size());
        kernels::conv2d_forward<double>(d, x.data(), w.data(), b.data(), y1);
        kernels::reference::conv2d_forward<double>(d, x.data(), w.data(), b.data(), y2);
        for (std::size_t i = 0; i < y1.size(); ++i)
            ASSERT_NEAR(y1[i], y2[i], 1e-12);

        std::vector<double> dx1(x.data().size()), dw1(w.data().size()), db1(b.data().size());
        std::vector<double> dx2(dx1.size()), dw2(dw1.size()), db2(db1.size());
        kernels::conv2d_backward<double>(d, x.data(), w.data(), dy.data(), dx1, dw1, db1);
        kernels::reference::conv2d_backward<double>(d, x.data(), w.data(), dy.data(), dx2, dw2, db2);
        for (std::size_t i = 0; i < dx1.size(); ++i)
            ASSERT_NEAR(dx1[i], dx2[i], 1e-11);
        for (std::size_t i = 0; i < dw1.size(); ++i)
            ASSERT_NEAR(dw1[i], dw2[i], 1e-11);
        for (std::size_t i = 0; i < db1.size(); ++i)
            ASSERT_NEAR(db1[i], db2[i], 1e-11);
    }
}

TEST(Kernels, ParallelConvTransposeMatchesReference)
{
    std::mt19937_64 rng(32);
    for (auto [sh, sw] : {std::pair<std::int64_t, std::int64_t>{2, 2}, {2, 1}, {1, 2}, {1, 1}}) {
        const kernels::ConvTranspose2dDims d{2, 4, 3, 5, 6, sh, sw};
        auto x = random_tensor64({d.batch, d.in_channels, d.height, d.width}, rng);
        auto w = random_tensor64({d.in_channels, d.out_channels, 2, 2}, rng);
        auto b = random_tensor64({d.out_channels}, rng);
        auto dy = random_tensor64({d.batch, d.out_channels, d.out_height(), d.out_width()}, rng);
        std::vector<double> y1(dy.data().size()), y2(dy.data().size());
        kernels::conv_transpose2d_forward<double>(d, x.data(), w.data(), b.data(), y1);
        kernels::reference::conv_transpose2d_forward<double>(d, x.data(), w.data(), b.data(), y2);
        for (std::size_t i = 0; i < y1.size(); ++i)
            ASSERT_NEAR(y1[i], y2[i], 1e-12);
        std::vector<double> dx1(x.data().size()), dw1(w.data().size()), db1(b.data().size());
        std::vector<double> dx2(dx1.size()), dw2(dw1.size()), db2(db1.size());
        kernels::conv_transpose2d_backward<double>(d, x.data(), w.data(), dy.data(), dx1, dw1, db1);
        kernels::reference::conv_transpose2d_backward<double>(d, x.data(), w.data(), dy.data(), dx2, dw2, db2);
        for (std::size_t i = 0; i < dx1.size(); ++i)
            ASSERT_NEAR(dx1[i], dx2[i], 1e-11);
        for (std::size_t i = 0; i < dw1.size(); ++i)
            ASSERT_NEAR(dw1[i], dw2[i], 1e-11);
        for (std::size_t i = 0; i < db1.size(); ++i)
            ASSERT_NEAR(db1[i], db2[i], 1e-11);
    }
}

TEST(Kernels, GemmMatchesReferenceOnRaggedSizes)
{
    std::mt19937_64 rng(33);
    for (auto [m, n, k] : {std::tuple<int, int, int>{1, 1, 1}, {7, 300, 130}, {65, 257, 3}, {130, 5, 260}}) {
        auto a = random_tensor64({m, k}, rng);
        auto b = random_tensor64({k, n}, rng);
        auto c0 = random_tensor64({m, n}, rng);
        std::vector<double> c1(c0.data().begin(), c0.data().end()), c2 = c1;
        kernels::gemm<double>(m, n, k, a.data().data(), b.data().data(), c1.data());
        kernels::reference::gemm<double>(m, n, k, a.data().data(), b.data().data(), c2.data());
        for (std::size_t i = 0; i < c1.size(); ++i)
            ASSERT_NEAR(c1[i], c2[i], 1e-11);
    }
}
