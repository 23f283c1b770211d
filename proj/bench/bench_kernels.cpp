// Parallel kernels against their serial references. Run with
// OMP_NUM_THREADS=N to see scaling; on one core the gap is the blocking and
// matrix-caching work alone.

#include "sinterp/kernels.hpp"
#include "sinterp/metrics.hpp"
#include "sinterp/phantom.hpp"
#include "sinterp/projector.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace sinterp;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v)
        x = dist(rng);
    return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state)
{
    const auto n = state.range(0);
    const auto a = random_floats(static_cast<std::size_t>(n * n), 1);
    const auto b = random_floats(static_cast<std::size_t>(n * n), 2);
    std::vector<float> c(static_cast<std::size_t>(n * n));
    for (auto _ : state) {
        std::fill(c.begin(), c.end(), 0.0f);
        if constexpr (Parallel)
            kernels::gemm<float>(n, n, n, a.data(), b.data(), c.data());
        else
            kernels::reference::gemm<float>(n, n, n, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

// One U-Net level: batch 16, 32 -> 32 channels, 3x3.
kernels::Conv2dDims conv_dims(std::int64_t extent)
{
    return {16, 32, 32, extent, extent, 3};
}

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state)
{
    const auto d = conv_dims(state.range(0));
    const auto x = random_floats(static_cast<std::size_t>(d.batch * d.in_channels * d.height * d.width), 1);
    const auto w = random_floats(static_cast<std::size_t>(d.out_channels * d.in_channels * 9), 2);
    const auto b = random_floats(static_cast<std::size_t>(d.out_channels), 3);
    std::vector<float> y(static_cast<std::size_t>(d.batch * d.out_channels * d.height * d.width));
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv2d_forward<float>(d, x, w, b, y);
        else
            kernels::reference::conv2d_forward<float>(d, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state)
{
    const auto d = conv_dims(state.range(0));
    const auto nx = static_cast<std::size_t>(d.batch * d.in_channels * d.height * d.width);
    const auto nw = static_cast<std::size_t>(d.out_channels * d.in_channels * 9);
    const auto x = random_floats(nx, 1);
    const auto w = random_floats(nw, 2);
    const auto dy = random_floats(static_cast<std::size_t>(d.batch * d.out_channels * d.height * d.width), 3);
    std::vector<float> dx(nx), dw(nw), db(static_cast<std::size_t>(d.out_channels));
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv2d_backward<float>(d, x, w, dy, dx, dw, db);
        else
            kernels::reference::conv2d_backward<float>(d, x, w, dy, dx, dw, db);
        benchmark::DoNotOptimize(dx.data());
    }
}

kernels::ConvTranspose2dDims convt_dims(std::int64_t extent)
{
    return {16, 64, 32, extent, extent, 2, 2};
}

template <bool Parallel>
void BM_ConvTransposeForward(benchmark::State& state)
{
    const auto d = convt_dims(state.range(0));
    const auto x = random_floats(static_cast<std::size_t>(d.batch * d.in_channels * d.height * d.width), 1);
    const auto w = random_floats(static_cast<std::size_t>(d.in_channels * d.out_channels * 4), 2);
    const auto b = random_floats(static_cast<std::size_t>(d.out_channels), 3);
    std::vector<float> y(static_cast<std::size_t>(d.batch * d.out_channels * d.out_height() * d.out_width()));
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv_transpose2d_forward<float>(d, x, w, b, y);
        else
            kernels::reference::conv_transpose2d_forward<float>(d, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_ConvTransposeBackward(benchmark::State& state)
{
    const auto d = convt_dims(state.range(0));
    const auto nx = static_cast<std::size_t>(d.batch * d.in_channels * d.height * d.width);
    const auto nw = static_cast<std::size_t>(d.in_channels * d.out_channels * 4);
    const auto x = random_floats(nx, 1);
    const auto w = random_floats(nw, 2);
    const auto dy = random_floats(static_cast<std::size_t>(d.batch * d.out_channels * d.out_height() * d.out_width()), 3);
    std::vector<float> dx(nx), dw(nw), db(static_cast<std::size_t>(d.out_channels));
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv_transpose2d_backward<float>(d, x, w, dy, dx, dw, db);
        else
            kernels::reference::conv_transpose2d_backward<float>(d, x, w, dy, dx, dw, db);
        benchmark::DoNotOptimize(dx.data());
    }
}

ProjectionGeometry views(std::int64_t n)
{
    ProjectionGeometry g;
    g.n_angles = n;
    return g;
}

// The matrix is built once and cached, so this times the sparse product.
void BM_ProjectMatrix(benchmark::State& state)
{
    const auto image = shepp_logan(128);
    const auto g = views(state.range(0));
    project(image, g);
    for (auto _ : state)
        benchmark::DoNotOptimize(project(image, g).data.data());
}

void BM_ProjectReference(benchmark::State& state)
{
    const auto image = shepp_logan(128);
    const auto g = views(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(reference::project(image, g).data.data());
}

void BM_ProjectMatrixBuild(benchmark::State& state)
{
    const auto g = views(state.range(0));
    for (auto _ : state) {
        SystemMatrix m(128, 128, 1.0, view_angles(g), 128, 1.0, 0.5);
        benchmark::DoNotOptimize(m.nnz());
    }
}

void BM_Backproject(benchmark::State& state)
{
    const auto sino = project(shepp_logan(128), views(128));
    const auto m = system_matrix(128, 128, 1.0, view_angles(views(128)), 128, 1.0, 0.5);
    const std::vector<double> y(sino.data.begin(), sino.data.end());
    std::vector<double> x(128 * 128);
    for (auto _ : state) {
        m->back(y, x);
        benchmark::DoNotOptimize(x.data());
    }
}

void BM_BackprojectReference(benchmark::State& state)
{
    const auto sino = project(shepp_logan(128), views(128));
    for (auto _ : state)
        benchmark::DoNotOptimize(reference::backproject(sino, 128, 128, 1.0).data());
}

template <bool Parallel>
void BM_Ssim(benchmark::State& state)
{
    const auto n = state.range(0);
    const auto a = random_floats(static_cast<std::size_t>(n * n), 1);
    auto b = a;
    for (std::size_t i = 0; i < b.size(); i += 7)
        b[i] *= 0.5f;
    const GridView ga{n, n, a}, gb{n, n, b};
    for (auto _ : state) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(ssim(ga, gb));
        else
            benchmark::DoNotOptimize(reference::ssim(ga, gb));
    }
}

} // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<false>)->Name("gemm/reference")->Arg(128)->Arg(256);
BENCHMARK(BM_Conv2dForward<true>)->Name("conv2d_forward/parallel")->Arg(32)->Arg(64);
BENCHMARK(BM_Conv2dForward<false>)->Name("conv2d_forward/reference")->Arg(32)->Arg(64);
BENCHMARK(BM_Conv2dBackward<true>)->Name("conv2d_backward/parallel")->Arg(32);
BENCHMARK(BM_Conv2dBackward<false>)->Name("conv2d_backward/reference")->Arg(32);
BENCHMARK(BM_ConvTransposeForward<true>)->Name("conv_transpose2d_forward/parallel")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvTransposeForward<false>)->Name("conv_transpose2d_forward/reference")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvTransposeBackward<true>)->Name("conv_transpose2d_backward/parallel")->Arg(16);
BENCHMARK(BM_ConvTransposeBackward<false>)->Name("conv_transpose2d_backward/reference")->Arg(16);
BENCHMARK(BM_ProjectMatrix)->Name("project/matrix")->Arg(32)->Arg(128);
BENCHMARK(BM_ProjectReference)->Name("project/reference")->Arg(32)->Arg(128);
BENCHMARK(BM_ProjectMatrixBuild)->Name("project/matrix_build")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Backproject)->Name("backproject/matrix");
BENCHMARK(BM_BackprojectReference)->Name("backproject/reference");
BENCHMARK(BM_Ssim<true>)->Name("ssim/separable")->Arg(128);
BENCHMARK(BM_Ssim<false>)->Name("ssim/reference")->Arg(128);

BENCHMARK_MAIN();
