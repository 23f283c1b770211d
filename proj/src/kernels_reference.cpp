// Serial textbook loops. Slow on purpose; they exist to check the parallel
// kernels and to anchor the benchmarks.

#include "sinterp/kernels.hpp"

#include <algorithm>

namespace sinterp::kernels::reference {

template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c)
{
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            T acc = c[i * n + j];
            for (std::int64_t p = 0; p < k; ++p)
                acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
}

template <class T>
void conv2d_forward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y)
{
    const std::int64_t k = d.kernel, pad = k / 2, h = d.height, wd = d.width;
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t i = 0; i < h; ++i)
                for (std::int64_t j = 0; j < wd; ++j) {
                    T acc = b[co];
                    for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
                        for (std::int64_t di = 0; di < k; ++di)
                            for (std::int64_t dj = 0; dj < k; ++dj) {
                                const std::int64_t si = i + di - pad, sj = j + dj - pad;
                                if (si < 0 || si >= h || sj < 0 || sj >= wd)
                                    continue;
                                acc += w[((co * d.in_channels + ci) * k + di) * k + dj]
                                       * x[((n * d.in_channels + ci) * h + si) * wd + sj];
                            }
                    y[((n * d.out_channels + co) * h + i) * wd + j] = acc;
                }
}

template <class T>
void conv2d_backward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> db)
{
    const std::int64_t k = d.kernel, pad = k / 2, h = d.height, wd = d.width;
    std::fill(dw.begin(), dw.end(), T(0));
    std::fill(db.begin(), db.end(), T(0));
    std::fill(dx.begin(), dx.end(), T(0));
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t i = 0; i < h; ++i)
                for (std::int64_t j = 0; j < wd; ++j) {
                    const T g = dy[((n * d.out_channels + co) * h + i) * wd + j];
                    db[co] += g;
                    for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
                        for (std::int64_t di = 0; di < k; ++di)
                            for (std::int64_t dj = 0; dj < k; ++dj) {
                                const std::int64_t si = i + di - pad, sj = j + dj - pad;
                                if (si < 0 || si >= h || sj < 0 || sj >= wd)
                                    continue;
                                const auto widx = ((co * d.in_channels + ci) * k + di) * k + dj;
                                const auto xidx = ((n * d.in_channels + ci) * h + si) * wd + sj;
                                dw[widx] += g * x[xidx];
                                if (!dx.empty())
                                    dx[xidx] += g * w[widx];
                            }
                }
}

template <class T>
void conv_transpose2d_forward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y)
{
    const std::int64_t h = d.height, wd = d.width, oh = d.out_height(), ow = d.out_width();
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t oi = 0; oi < oh; ++oi)
                for (std::int64_t oj = 0; oj < ow; ++oj) {
                    T acc = b[co];
                    for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
                        for (std::int64_t di = 0; di < 2; ++di)
                            for (std::int64_t dj = 0; dj < 2; ++dj) {
                                const std::int64_t ri = oi - di, rj = oj - dj;
                                if (ri < 0 || rj < 0 || ri % d.stride_h || rj % d.stride_w)
                                    continue;
                                const std::int64_t i = ri / d.stride_h, j = rj / d.stride_w;
                                if (i >= h || j >= wd)
                                    continue;
                                acc += w[((ci * d.out_channels + co) * 2 + di) * 2 + dj]
                                       * x[((n * d.in_channels + ci) * h + i) * wd + j];
                            }
                    y[((n * d.out_channels + co) * oh + oi) * ow + oj] = acc;
                }
}

template <class T>
void conv_transpose2d_backward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                               std::span<const T> dy, std::span<T> dx, std::span<T> dw, std::span<T> db)
{
    const std::int64_t h = d.height, wd = d.width, oh = d.out_height(), ow = d.out_width();
    std::fill(dw.begin(), dw.end(), T(0));
    std::fill(db.begin(), db.end(), T(0));
    std::fill(dx.begin(), dx.end(), T(0));
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
            for (std::int64_t i = 0; i < h; ++i)
                for (std::int64_t j = 0; j < wd; ++j) {
                    const auto xidx = ((n * d.in_channels + ci) * h + i) * wd + j;
                    for (std::int64_t co = 0; co < d.out_channels; ++co)
                        for (std::int64_t di = 0; di < 2; ++di)
                            for (std::int64_t dj = 0; dj < 2; ++dj) {
                                const std::int64_t oi = d.stride_h * i + di, oj = d.stride_w * j + dj;
                                if (oi >= oh || oj >= ow)
                                    continue;
                                const T g = dy[((n * d.out_channels + co) * oh + oi) * ow + oj];
                                const auto widx = ((ci * d.out_channels + co) * 2 + di) * 2 + dj;
                                dw[widx] += g * x[xidx];
                                if (!dx.empty())
                                    dx[xidx] += g * w[widx];
                            }
                }
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t p = 0; p < oh * ow; ++p)
                db[co] += dy[(n * d.out_channels + co) * oh * ow + p];
}

#define SINTERP_INSTANTIATE(T)                                                                                     \
    template void gemm<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*);                       \
    template void conv2d_forward<T>(const Conv2dDims&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                    std::span<T>);                                                                 \
    template void conv2d_backward<T>(const Conv2dDims&, std::span<const T>, std::span<const T>,                    \
                                     std::span<const T>, std::span<T>, std::span<T>, std::span<T>);                \
    template void conv_transpose2d_forward<T>(const ConvTranspose2dDims&, std::span<const T>, std::span<const T>,  \
                                              std::span<const T>, std::span<T>);                                   \
    template void conv_transpose2d_backward<T>(const ConvTranspose2dDims&, std::span<const T>,                     \
                                               std::span<const T>, std::span<const T>, std::span<T>,               \
                                               std::span<T>, std::span<T>);

SINTERP_INSTANTIATE(float)
SINTERP_INSTANTIATE(double)

} // namespace sinterp::kernels::reference
