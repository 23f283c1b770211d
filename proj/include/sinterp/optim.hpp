#pragma once

#include "sinterp/tensor.hpp"

#include <span>

namespace sinterp {

struct AdamConfig
{
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

/// One bias-corrected Adam update over every parameter, then clears the
/// gradients. Throws ValidationError naming the first parameter without a
/// gradient, before touching any state.
void adam_step(std::span<Parameter> params, const AdamConfig& config = {});

} // namespace sinterp
