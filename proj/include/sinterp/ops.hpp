#pragma once

#include "sinterp/tensor.hpp"

namespace sinterp {

struct Stride2d
{
    std::int64_t h = 2;
    std::int64_t w = 2;
};

/// Cross-correlation with zero "same" padding. Kernel [C_out, C_in, k, k]
/// with k in {1, 3}; bias [C_out].
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias);

/// Learned upsampling with a 2x2 kernel [C_in, C_out, 2, 2]. Each stride is
/// 1 or 2 and multiplies the matching output extent.
template <class T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, Stride2d stride);

/// Mean over non-overlapping 2x2 blocks; H and W must be even.
template <class T>
BasicTensor<T> avgpool2x2(const BasicTensor<T>& input);

/// Nearest-neighbour repeat by integer factors along H and W.
template <class T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& input, std::int64_t factor_h, std::int64_t factor_w);

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Stacks `a` then `b` along the channel axis of [B, C, H, W] tensors.
template <class T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Mean of squared differences, as a one-element tensor.
template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target);

} // namespace sinterp
