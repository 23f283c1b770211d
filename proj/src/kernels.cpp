#include "sinterp/kernels.hpp"

#include <algorithm>
#include <vector>

namespace sinterp::kernels {

namespace {

constexpr std::int64_t kRowBlock = 64;
constexpr std::int64_t kColBlock = 256;
constexpr std::int64_t kDepthBlock = 128;

// Register tile of 4 rows x kTile columns accumulated over the whole depth
// block, so C is loaded and stored once per block.
constexpr std::int64_t kTile = 32;

template <class T>
void gemm_block(std::int64_t i0, std::int64_t i1, std::int64_t j0, std::int64_t nw, std::int64_t n,
                std::int64_t k, const T* a, const T* b, T* c)
{
    for (std::int64_t kk = 0; kk < k; kk += kDepthBlock) {
        const std::int64_t k1 = std::min(k, kk + kDepthBlock);
        std::int64_t i = i0;
        for (; i + 4 <= i1; i += 4) {
            std::int64_t j = 0;
            for (; j + kTile <= nw; j += kTile) {
                T acc[4][kTile];
                for (int r = 0; r < 4; ++r)
                    for (std::int64_t t = 0; t < kTile; ++t)
                        acc[r][t] = c[(i + r) * n + j0 + j + t];
                for (std::int64_t p = kk; p < k1; ++p) {
                    const T* __restrict bp = b + p * n + j0 + j;
                    const T a0 = a[i * k + p];
                    const T a1 = a[(i + 1) * k + p];
                    const T a2 = a[(i + 2) * k + p];
                    const T a3 = a[(i + 3) * k + p];
#pragma omp simd
                    for (std::int64_t t = 0; t < kTile; ++t) {
                        const T bt = bp[t];
                        acc[0][t] += a0 * bt;
                        acc[1][t] += a1 * bt;
                        acc[2][t] += a2 * bt;
                        acc[3][t] += a3 * bt;
                    }
                }
                for (int r = 0; r < 4; ++r)
                    for (std::int64_t t = 0; t < kTile; ++t)
                        c[(i + r) * n + j0 + j + t] = acc[r][t];
            }
            for (; j < nw; ++j) {
                for (int r = 0; r < 4; ++r) {
                    T acc = c[(i + r) * n + j0 + j];
                    for (std::int64_t p = kk; p < k1; ++p)
                        acc += a[(i + r) * k + p] * b[p * n + j0 + j];
                    c[(i + r) * n + j0 + j] = acc;
                }
            }
        }
        for (; i < i1; ++i) {
            T* __restrict c0 = c + i * n + j0;
            for (std::int64_t p = kk; p < k1; ++p) {
                const T a0 = a[i * k + p];
                const T* __restrict bp = b + p * n + j0;
#pragma omp simd
                for (std::int64_t j = 0; j < nw; ++j)
                    c0[j] += a0 * bp[j];
            }
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T as 4x4 tiles of dot products. The SIMD
// reduction splits each dot product into lanes in a fixed pattern, so the
// result is reproducible for a given build.
template <class T>
void gemm_nt_rows(std::int64_t i0, std::int64_t i1, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c)
{
    std::int64_t i = i0;
    for (; i + 4 <= i1; i += 4) {
        std::int64_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const T* a0 = a + i * k;
            const T* a1 = a0 + k;
            const T* a2 = a1 + k;
            const T* a3 = a2 + k;
            const T* b0 = b + j * k;
            const T* b1 = b0 + k;
            const T* b2 = b1 + k;
            const T* b3 = b2 + k;
            T s00 = 0, s01 = 0, s02 = 0, s03 = 0, s10 = 0, s11 = 0, s12 = 0, s13 = 0;
            T s20 = 0, s21 = 0, s22 = 0, s23 = 0, s30 = 0, s31 = 0, s32 = 0, s33 = 0;
#pragma omp simd reduction(+ : s00, s01, s02, s03, s10, s11, s12, s13, s20, s21, s22, s23, s30, s31, s32, s33)
            for (std::int64_t p = 0; p < k; ++p) {
                const T x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
                const T y0 = b0[p], y1 = b1[p], y2 = b2[p], y3 = b3[p];
                s00 += x0 * y0; s01 += x0 * y1; s02 += x0 * y2; s03 += x0 * y3;
                s10 += x1 * y0; s11 += x1 * y1; s12 += x1 * y2; s13 += x1 * y3;
                s20 += x2 * y0; s21 += x2 * y1; s22 += x2 * y2; s23 += x2 * y3;
                s30 += x3 * y0; s31 += x3 * y1; s32 += x3 * y2; s33 += x3 * y3;
            }
            T* c0 = c + i * n + j;
            c0[0] += s00; c0[1] += s01; c0[2] += s02; c0[3] += s03;
            c0 += n;
            c0[0] += s10; c0[1] += s11; c0[2] += s12; c0[3] += s13;
            c0 += n;
            c0[0] += s20; c0[1] += s21; c0[2] += s22; c0[3] += s23;
            c0 += n;
            c0[0] += s30; c0[1] += s31; c0[2] += s32; c0[3] += s33;
        }
        for (; j < n; ++j)
            for (std::int64_t r = 0; r < 4; ++r) {
                const T* ar = a + (i + r) * k;
                const T* bj = b + j * k;
                T s = 0;
#pragma omp simd reduction(+ : s)
                for (std::int64_t p = 0; p < k; ++p)
                    s += ar[p] * bj[p];
                c[(i + r) * n + j] += s;
            }
    }
    for (; i < i1; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            const T* ar = a + i * k;
            const T* bj = b + j * k;
            T s = 0;
#pragma omp simd reduction(+ : s)
            for (std::int64_t p = 0; p < k; ++p)
                s += ar[p] * bj[p];
            c[i * n + j] += s;
        }
}

// col[(ci*k*k + di*k + dj), i*W + j] = x[ci, i+di-pad, j+dj-pad]
template <class T>
void im2col(const Conv2dDims& d, const T* x, T* col)
{
    const std::int64_t k = d.kernel, pad = k / 2, h = d.height, w = d.width;
    const std::int64_t rows = d.in_channels * k * k;
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t ci = r / (k * k), di = (r / k) % k, dj = r % k;
        const T* plane = x + ci * h * w;
        T* out = col + r * h * w;
        for (std::int64_t i = 0; i < h; ++i) {
            const std::int64_t si = i + di - pad;
            T* orow = out + i * w;
            if (si < 0 || si >= h) {
                std::fill(orow, orow + w, T(0));
                continue;
            }
            const T* srow = plane + si * w;
            for (std::int64_t j = 0; j < w; ++j) {
                const std::int64_t sj = j + dj - pad;
                orow[j] = (sj >= 0 && sj < w) ? srow[sj] : T(0);
            }
        }
    }
}

template <class T>
void col2im(const Conv2dDims& d, const T* col, T* dx)
{
    const std::int64_t k = d.kernel, pad = k / 2, h = d.height, w = d.width;
#pragma omp parallel for schedule(static)
    for (std::int64_t ci = 0; ci < d.in_channels; ++ci) {
        T* plane = dx + ci * h * w;
        std::fill(plane, plane + h * w, T(0));
        for (std::int64_t di = 0; di < k; ++di) {
            for (std::int64_t dj = 0; dj < k; ++dj) {
                const T* src = col + ((ci * k + di) * k + dj) * h * w;
                for (std::int64_t i = 0; i < h; ++i) {
                    const std::int64_t si = i + di - pad;
                    if (si < 0 || si >= h)
                        continue;
                    const std::int64_t jlo = std::max<std::int64_t>(0, pad - dj);
                    const std::int64_t jhi = std::min(w, w + pad - dj);
                    T* drow = plane + si * w;
                    const T* srow = src + i * w;
                    for (std::int64_t j = jlo; j < jhi; ++j)
                        drow[j + dj - pad] += srow[j];
                }
            }
        }
    }
}

} // namespace

template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c)
{
    const std::int64_t row_blocks = (m + kRowBlock - 1) / kRowBlock;
    const std::int64_t col_blocks = (n + kColBlock - 1) / kColBlock;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t rb = 0; rb < row_blocks; ++rb) {
        for (std::int64_t cb = 0; cb < col_blocks; ++cb) {
            const std::int64_t i0 = rb * kRowBlock, i1 = std::min(m, i0 + kRowBlock);
            const std::int64_t j0 = cb * kColBlock, nw = std::min(n, j0 + kColBlock) - j0;
            gemm_block(i0, i1, j0, nw, n, k, a, b, c);
        }
    }
}

template <class T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c)
{
    const std::int64_t row_groups = (m + 3) / 4;
#pragma omp parallel for schedule(static)
    for (std::int64_t g = 0; g < row_groups; ++g)
        gemm_nt_rows(g * 4, std::min(m, g * 4 + 4), n, k, a, b, c);
}

template <class T>
void conv2d_forward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y)
{
    const std::int64_t p = d.height * d.width;
    const std::int64_t kdim = d.in_channels * d.kernel * d.kernel;
    std::vector<T> col(d.kernel == 1 ? 0 : static_cast<std::size_t>(kdim * p));
    for (std::int64_t n = 0; n < d.batch; ++n) {
        const T* xs = x.data() + n * d.in_channels * p;
        T* ys = y.data() + n * d.out_channels * p;
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            std::fill(ys + co * p, ys + (co + 1) * p, b[static_cast<std::size_t>(co)]);
        const T* cols = xs;
        if (d.kernel != 1) {
            im2col(d, xs, col.data());
            cols = col.data();
        }
        gemm(d.out_channels, p, kdim, w.data(), cols, ys);
    }
}

template <class T>
void conv2d_backward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> db)
{
    const std::int64_t p = d.height * d.width;
    const std::int64_t kdim = d.in_channels * d.kernel * d.kernel;

#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < d.out_channels; ++co) {
        T acc = 0;
        for (std::int64_t n = 0; n < d.batch; ++n) {
            const T* g = dy.data() + (n * d.out_channels + co) * p;
            for (std::int64_t i = 0; i < p; ++i)
                acc += g[i];
        }
        db[static_cast<std::size_t>(co)] = acc;
    }

    std::fill(dw.begin(), dw.end(), T(0));
    std::vector<T> col(d.kernel == 1 ? 0 : static_cast<std::size_t>(kdim * p));
    for (std::int64_t n = 0; n < d.batch; ++n) {
        const T* xs = x.data() + n * d.in_channels * p;
        const T* cols = xs;
        if (d.kernel != 1) {
            im2col(d, xs, col.data());
            cols = col.data();
        }
        gemm_nt(d.out_channels, kdim, p, dy.data() + n * d.out_channels * p, cols, dw.data());
    }

    if (dx.empty())
        return;
    std::vector<T> wt(static_cast<std::size_t>(kdim * d.out_channels));
    for (std::int64_t co = 0; co < d.out_channels; ++co)
        for (std::int64_t r = 0; r < kdim; ++r)
            wt[static_cast<std::size_t>(r * d.out_channels + co)] = w[static_cast<std::size_t>(co * kdim + r)];
    std::vector<T> dcol(static_cast<std::size_t>(kdim * p));
    for (std::int64_t n = 0; n < d.batch; ++n) {
        T* dxs = dx.data() + n * d.in_channels * p;
        const T* dys = dy.data() + n * d.out_channels * p;
        if (d.kernel == 1) {
            std::fill(dxs, dxs + d.in_channels * p, T(0));
            gemm(kdim, p, d.out_channels, wt.data(), dys, dxs);
            continue;
        }
        std::fill(dcol.begin(), dcol.end(), T(0));
        gemm(kdim, p, d.out_channels, wt.data(), dys, dcol.data());
        col2im(d, dcol.data(), dxs);
    }
}

// Transposed conv as one GEMM per sample: taps[(co,di,dj), p] =
// sum_ci w[ci,co,di,dj] * x[ci,p], then each tap plane is scattered onto its
// strided output positions.
template <class T>
std::vector<T> tap_major_weights(const ConvTranspose2dDims& d, std::span<const T> w)
{
    std::vector<T> wr(static_cast<std::size_t>(d.out_channels * 4 * d.in_channels));
    for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t t = 0; t < 4; ++t)
                wr[static_cast<std::size_t>((co * 4 + t) * d.in_channels + ci)]
                    = w[static_cast<std::size_t>((ci * d.out_channels + co) * 4 + t)];
    return wr;
}

template <class T>
void conv_transpose2d_forward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y)
{
    const std::int64_t h = d.height, wd = d.width, oh = d.out_height(), ow = d.out_width();
    const std::int64_t p = h * wd, taps = d.out_channels * 4;
    const auto wr = tap_major_weights(d, w);
    std::vector<T> z(static_cast<std::size_t>(taps * p));
    for (std::int64_t n = 0; n < d.batch; ++n) {
        std::fill(z.begin(), z.end(), T(0));
        gemm(taps, p, d.in_channels, wr.data(), x.data() + n * d.in_channels * p, z.data());
#pragma omp parallel for schedule(static)
        for (std::int64_t co = 0; co < d.out_channels; ++co) {
            T* out = y.data() + (n * d.out_channels + co) * oh * ow;
            std::fill(out, out + oh * ow, b[static_cast<std::size_t>(co)]);
            for (std::int64_t t = 0; t < 4; ++t) {
                const std::int64_t di = t / 2, dj = t % 2;
                const T* src = z.data() + (co * 4 + t) * p;
                for (std::int64_t i = 0; i < h; ++i) {
                    const std::int64_t oi = d.stride_h * i + di;
                    if (oi >= oh)
                        continue;
                    T* orow = out + oi * ow;
                    const T* srow = src + i * wd;
                    for (std::int64_t j = 0; j < wd; ++j) {
                        const std::int64_t oj = d.stride_w * j + dj;
                        if (oj < ow)
                            orow[oj] += srow[j];
                    }
                }
            }
        }
    }
}

template <class T>
void conv_transpose2d_backward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                               std::span<const T> dy, std::span<T> dx, std::span<T> dw, std::span<T> db)
{
    const std::int64_t h = d.height, wd = d.width, oh = d.out_height(), ow = d.out_width();
    const std::int64_t p = h * wd, taps = d.out_channels * 4;

#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < d.out_channels; ++co) {
        T acc = 0;
        for (std::int64_t n = 0; n < d.batch; ++n) {
            const T* g = dy.data() + (n * d.out_channels + co) * oh * ow;
            for (std::int64_t i = 0; i < oh * ow; ++i)
                acc += g[i];
        }
        db[static_cast<std::size_t>(co)] = acc;
    }

    const auto wr = tap_major_weights(d, w);
    std::vector<T> wrt(wr.size());
    for (std::int64_t r = 0; r < taps; ++r)
        for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
            wrt[static_cast<std::size_t>(ci * taps + r)] = wr[static_cast<std::size_t>(r * d.in_channels + ci)];

    std::vector<T> dwr(wr.size(), T(0));
    std::vector<T> dz(static_cast<std::size_t>(taps * p));
    for (std::int64_t n = 0; n < d.batch; ++n) {
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < taps; ++r) {
            const std::int64_t co = r / 4, di = (r % 4) / 2, dj = r % 2;
            const T* g = dy.data() + (n * d.out_channels + co) * oh * ow;
            T* dst = dz.data() + r * p;
            for (std::int64_t i = 0; i < h; ++i) {
                const std::int64_t oi = d.stride_h * i + di;
                for (std::int64_t j = 0; j < wd; ++j) {
                    const std::int64_t oj = d.stride_w * j + dj;
                    dst[i * wd + j] = (oi < oh && oj < ow) ? g[oi * ow + oj] : T(0);
                }
            }
        }
        const T* xs = x.data() + n * d.in_channels * p;
        gemm_nt(taps, d.in_channels, p, dz.data(), xs, dwr.data());
        if (!dx.empty()) {
            T* dxs = dx.data() + n * d.in_channels * p;
            std::fill(dxs, dxs + d.in_channels * p, T(0));
            gemm(d.in_channels, p, taps, wrt.data(), dz.data(), dxs);
        }
    }
    for (std::int64_t ci = 0; ci < d.in_channels; ++ci)
        for (std::int64_t co = 0; co < d.out_channels; ++co)
            for (std::int64_t t = 0; t < 4; ++t)
                dw[static_cast<std::size_t>((ci * d.out_channels + co) * 4 + t)]
                    = dwr[static_cast<std::size_t>((co * 4 + t) * d.in_channels + ci)];
}

#define SINTERP_INSTANTIATE(T)                                                                                     \
    template void gemm<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*);                       \
    template void gemm_nt<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*);                    \
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

} // namespace sinterp::kernels
