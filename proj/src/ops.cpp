#include "sinterp/ops.hpp"

#include "sinterp/error.hpp"
#include "sinterp/kernels.hpp"

#include <algorithm>

namespace sinterp {

namespace {

template <class T>
void require_rank4(const BasicTensor<T>& t, const char* op)
{
    if (t.ndim() != 4)
        throw ShapeError(std::string(op) + ": expected [B,C,H,W] input, got " + to_string(t.shape()));
}

template <class T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

} // namespace

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias)
{
    require_rank4(input, "conv2d");
    if (kernel.ndim() != 4 || kernel.dim(2) != kernel.dim(3) || (kernel.dim(2) != 1 && kernel.dim(2) != 3))
        throw ShapeError("conv2d: kernel must be [C_out,C_in,3,3] or [C_out,C_in,1,1], got "
                         + to_string(kernel.shape()));
    if (kernel.dim(1) != input.dim(1))
        throw ShapeError("conv2d: input " + to_string(input.shape()) + " has " + std::to_string(input.dim(1))
                         + " channels but kernel " + to_string(kernel.shape()) + " expects "
                         + std::to_string(kernel.dim(1)));
    if (bias.ndim() != 1 || bias.dim(0) != kernel.dim(0))
        throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match kernel "
                         + to_string(kernel.shape()));

    const kernels::Conv2dDims d{input.dim(0), input.dim(1), kernel.dim(0), input.dim(2), input.dim(3), kernel.dim(2)};
    Shape out_shape{d.batch, d.out_channels, d.height, d.width};
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    kernels::conv2d_forward<T>(d, input.data(), kernel.data(), bias.data(), out);

    ImplPtr<T> xi = input.impl(), wi = kernel.impl(), bi = bias.impl();
    return make_op_result<T>(std::move(out_shape), std::move(out), {xi, wi, bi},
                             [d, xi, wi, bi](const detail::TensorImpl<T>& o) {
                                 std::vector<T> dx(xi->requires_grad ? xi->data.size() : 0);
                                 std::vector<T> dw(wi->data.size()), db(bi->data.size());
                                 kernels::conv2d_backward<T>(d, xi->data, wi->data, o.grad, dx, dw, db);
                                 if (xi->requires_grad)
                                     xi->accumulate_grad(dx);
                                 if (wi->requires_grad)
                                     wi->accumulate_grad(dw);
                                 if (bi->requires_grad)
                                     bi->accumulate_grad(db);
                             });
}

template <class T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, Stride2d stride)
{
    require_rank4(input, "conv_transpose2d");
    auto valid = [](std::int64_t s) { return s == 1 || s == 2; };
    if (!valid(stride.h) || !valid(stride.w))
        throw ValidationError("conv_transpose2d: stride must be 1 or 2 per axis, got (" + std::to_string(stride.h)
                              + "," + std::to_string(stride.w) + ")");
    if (kernel.ndim() != 4 || kernel.dim(2) != 2 || kernel.dim(3) != 2)
        throw ShapeError("conv_transpose2d: kernel must be [C_in,C_out,2,2], got " + to_string(kernel.shape()));
    if (kernel.dim(0) != input.dim(1))
        throw ShapeError("conv_transpose2d: input " + to_string(input.shape()) + " does not match kernel "
                         + to_string(kernel.shape()));
    if (bias.ndim() != 1 || bias.dim(0) != kernel.dim(1))
        throw ShapeError("conv_transpose2d: bias " + to_string(bias.shape()) + " does not match kernel "
                         + to_string(kernel.shape()));

    const kernels::ConvTranspose2dDims d{input.dim(0), input.dim(1), kernel.dim(1), input.dim(2),
                                         input.dim(3), stride.h,      stride.w};
    Shape out_shape{d.batch, d.out_channels, d.out_height(), d.out_width()};
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    kernels::conv_transpose2d_forward<T>(d, input.data(), kernel.data(), bias.data(), out);

    ImplPtr<T> xi = input.impl(), wi = kernel.impl(), bi = bias.impl();
    return make_op_result<T>(std::move(out_shape), std::move(out), {xi, wi, bi},
                             [d, xi, wi, bi](const detail::TensorImpl<T>& o) {
                                 std::vector<T> dx(xi->requires_grad ? xi->data.size() : 0);
                                 std::vector<T> dw(wi->data.size()), db(bi->data.size());
                                 kernels::conv_transpose2d_backward<T>(d, xi->data, wi->data, o.grad, dx, dw, db);
                                 if (xi->requires_grad)
                                     xi->accumulate_grad(dx);
                                 if (wi->requires_grad)
                                     wi->accumulate_grad(dw);
                                 if (bi->requires_grad)
                                     bi->accumulate_grad(db);
                             });
}

template <class T>
BasicTensor<T> avgpool2x2(const BasicTensor<T>& input)
{
    require_rank4(input, "avgpool2x2");
    const auto planes = input.dim(0) * input.dim(1);
    const auto h = input.dim(2), w = input.dim(3);
    if (h % 2 || w % 2)
        throw ShapeError("avgpool2x2: spatial extents must be even, got " + to_string(input.shape()));
    const auto oh = h / 2, ow = w / 2;
    Shape out_shape{input.dim(0), input.dim(1), oh, ow};
    std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
    const T* x = input.data().data();
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j) {
                const T* r0 = x + (p * h + 2 * i) * w + 2 * j;
                const T* r1 = r0 + w;
                out[static_cast<std::size_t>((p * oh + i) * ow + j)] = T(0.25) * ((r0[0] + r0[1]) + (r1[0] + r1[1]));
            }

    ImplPtr<T> xi = input.impl();
    return make_op_result<T>(std::move(out_shape), std::move(out), {xi},
                             [xi, planes, h, w](const detail::TensorImpl<T>& o) {
                                 const auto oh = h / 2, ow = w / 2;
                                 std::vector<T> dx(xi->data.size());
#pragma omp parallel for schedule(static)
                                 for (std::int64_t p = 0; p < planes; ++p)
                                     for (std::int64_t i = 0; i < h; ++i)
                                         for (std::int64_t j = 0; j < w; ++j)
                                             dx[static_cast<std::size_t>((p * h + i) * w + j)]
                                                 = T(0.25) * o.grad[static_cast<std::size_t>((p * oh + i / 2) * ow + j / 2)];
                                 xi->accumulate_grad(dx);
                             });
}

template <class T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& input, std::int64_t factor_h, std::int64_t factor_w)
{
    require_rank4(input, "upsample_nearest");
    if (factor_h < 1 || factor_w < 1)
        throw ValidationError("upsample_nearest: factors must be positive");
    const auto planes = input.dim(0) * input.dim(1);
    const auto h = input.dim(2), w = input.dim(3);
    const auto oh = h * factor_h, ow = w * factor_w;
    Shape out_shape{input.dim(0), input.dim(1), oh, ow};
    std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
    const T* x = input.data().data();
    for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j)
                out[static_cast<std::size_t>((p * oh + i) * ow + j)] = x[(p * h + i / factor_h) * w + j / factor_w];

    ImplPtr<T> xi = input.impl();
    return make_op_result<T>(std::move(out_shape), std::move(out), {xi},
                             [xi, planes, h, w, factor_h, factor_w](const detail::TensorImpl<T>& o) {
                                 const auto oh = h * factor_h, ow = w * factor_w;
                                 std::vector<T> dx(xi->data.size(), T(0));
                                 for (std::int64_t p = 0; p < planes; ++p)
                                     for (std::int64_t i = 0; i < oh; ++i)
                                         for (std::int64_t j = 0; j < ow; ++j)
                                             dx[static_cast<std::size_t>((p * h + i / factor_h) * w + j / factor_w)]
                                                 += o.grad[static_cast<std::size_t>((p * oh + i) * ow + j)];
                                 xi->accumulate_grad(dx);
                             });
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input)
{
    auto x = input.data();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] > T(0) ? x[i] : T(0);
    ImplPtr<T> xi = input.impl();
    return make_op_result<T>(input.shape(), std::move(out), {xi}, [xi](const detail::TensorImpl<T>& o) {
        std::vector<T> dx(xi->data.size());
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] = xi->data[i] > T(0) ? o.grad[i] : T(0);
        xi->accumulate_grad(dx);
    });
}

template <class T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    require_rank4(a, "concat_channels");
    require_rank4(b, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: batch/spatial mismatch between " + to_string(a.shape()) + " and "
                         + to_string(b.shape()));
    const auto batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
    Shape out_shape{batch, ca + cb, a.dim(2), a.dim(3)};
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    for (std::int64_t n = 0; n < batch; ++n) {
        std::copy_n(a.data().data() + n * ca * plane, ca * plane, out.data() + n * (ca + cb) * plane);
        std::copy_n(b.data().data() + n * cb * plane, cb * plane, out.data() + (n * (ca + cb) + ca) * plane);
    }
    ImplPtr<T> ai = a.impl(), bi = b.impl();
    return make_op_result<T>(std::move(out_shape), std::move(out), {ai, bi},
                             [ai, bi, batch, ca, cb, plane](const detail::TensorImpl<T>& o) {
                                 const T* g = o.grad.data();
                                 if (ai->requires_grad) {
                                     std::vector<T> da(ai->data.size());
                                     for (std::int64_t n = 0; n < batch; ++n)
                                         std::copy_n(g + n * (ca + cb) * plane, ca * plane, da.data() + n * ca * plane);
                                     ai->accumulate_grad(da);
                                 }
                                 if (bi->requires_grad) {
                                     std::vector<T> db(bi->data.size());
                                     for (std::int64_t n = 0; n < batch; ++n)
                                         std::copy_n(g + (n * (ca + cb) + ca) * plane, cb * plane,
                                                     db.data() + n * cb * plane);
                                     bi->accumulate_grad(db);
                                 }
                             });
}

template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target)
{
    if (prediction.shape() != target.shape())
        throw ShapeError("mse_loss: prediction " + to_string(prediction.shape()) + " vs target "
                         + to_string(target.shape()));
    auto p = prediction.data();
    auto t = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        acc += diff * diff;
    }
    const auto n = static_cast<double>(p.size());
    ImplPtr<T> pi = prediction.impl(), ti = target.impl();
    return make_op_result<T>(Shape{1}, std::vector<T>{static_cast<T>(acc / n)}, {pi, ti},
                             [pi, ti](const detail::TensorImpl<T>& o) {
                                 const T scale = o.grad[0] * T(2) / static_cast<T>(pi->data.size());
                                 std::vector<T> dp(pi->data.size());
                                 for (std::size_t i = 0; i < dp.size(); ++i)
                                     dp[i] = scale * (pi->data[i] - ti->data[i]);
                                 if (pi->requires_grad)
                                     pi->accumulate_grad(dp);
                                 if (ti->requires_grad) {
                                     for (auto& v : dp)
                                         v = -v;
                                     ti->accumulate_grad(dp);
                                 }
                             });
}

#define SINTERP_INSTANTIATE(T)                                                                                     \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);           \
    template BasicTensor<T> conv_transpose2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                             Stride2d);                                                            \
    template BasicTensor<T> avgpool2x2(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> upsample_nearest(const BasicTensor<T>&, std::int64_t, std::int64_t);                   \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                           \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                         \
    template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

SINTERP_INSTANTIATE(float)
SINTERP_INSTANTIATE(double)

} // namespace sinterp
