#pragma once

// Raw compute kernels behind the autograd ops. Every kernel has an
// OpenMP-parallel version here and a plain serial version in
// `kernels::reference` that the tests and benchmarks compare against.
//
// Parallel kernels split work so that each output element is produced by a
// single thread with a fixed accumulation order, so results do not depend on
// the thread count.

#include <cstdint>
#include <span>

namespace sinterp::kernels {

/// C[M,N] += A[M,K] * B[K,N], all row-major.
template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c);

/// C[M,N] += A[M,K] * B[N,K]^T, all row-major.
template <class T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c);

/// Square kernel (1 or 3), stride 1, zero "same" padding of kernel/2.
struct Conv2dDims
{
    std::int64_t batch;
    std::int64_t in_channels;
    std::int64_t out_channels;
    std::int64_t height;
    std::int64_t width;
    std::int64_t kernel;
};

/// 2x2 kernel, weight layout [in, out, 2, 2], output extent stride*input.
/// Taps that land outside the output are dropped, which makes this the exact
/// adjoint of the matching strided 2x2 convolution.
struct ConvTranspose2dDims
{
    std::int64_t batch;
    std::int64_t in_channels;
    std::int64_t out_channels;
    std::int64_t height;
    std::int64_t width;
    std::int64_t stride_h;
    std::int64_t stride_w;

    std::int64_t out_height() const noexcept { return height * stride_h; }
    std::int64_t out_width() const noexcept { return width * stride_w; }
};

template <class T>
void conv2d_forward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y);

/// Overwrites dx, dw, db. An empty dx skips the input gradient.
template <class T>
void conv2d_backward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> db);

template <class T>
void conv_transpose2d_forward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y);

template <class T>
void conv_transpose2d_backward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                               std::span<const T> dy, std::span<T> dx, std::span<T> dw, std::span<T> db);

namespace reference {

template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c);

template <class T>
void conv2d_forward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y);

template <class T>
void conv2d_backward(const Conv2dDims& d, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> db);

template <class T>
void conv_transpose2d_forward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y);

template <class T>
void conv_transpose2d_backward(const ConvTranspose2dDims& d, std::span<const T> x, std::span<const T> w,
                               std::span<const T> dy, std::span<T> dx, std::span<T> dw, std::span<T> db);

} // namespace reference

} // namespace sinterp::kernels
