#include "sinterp/optim.hpp"

#include "sinterp/error.hpp"

#include <cmath>

namespace sinterp {

void adam_step(std::span<Parameter> params, const AdamConfig& config)
{
    for (const auto& p : params)
        if (!p.value.has_grad())
            throw ValidationError("adam_step: parameter '" + p.name + "' has no gradient");

    for (auto& p : params) {
        ++p.step;
        const double t = static_cast<double>(p.step);
        const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta1), t));
        const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta2), t));
        auto theta = p.value.mutable_data();
        auto grad = p.value.grad();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const float g = grad[i];
            float& m = p.first_moment[i];
            float& v = p.second_moment[i];
            m = config.beta1 * m + (1.0f - config.beta1) * g;
            v = config.beta2 * v + (1.0f - config.beta2) * g * g;
            const float m_hat = m / correction1;
            const float v_hat = v / correction2;
            theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
        p.value.clear_grad();
    }
}

} // namespace sinterp
