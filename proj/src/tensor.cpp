#include "sinterp/tensor.hpp"

#include "sinterp/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace sinterp {

namespace {
thread_local bool t_grad_enabled = true;
}

std::int64_t numel(const Shape& shape)
{
    std::int64_t n = 1;
    for (auto extent : shape)
        n *= extent;
    return n;
}

std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <class T>
void detail::TensorImpl<T>::accumulate_grad(std::span<const T> g)
{
    if (g.size() != data.size())
        throw ShapeError("gradient size " + std::to_string(g.size()) + " does not match tensor "
                         + to_string(shape));
    if (grad.empty()) {
        grad.assign(g.begin(), g.end());
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i)
        grad[i] += g[i];
}

template <class T>
BasicTensor<T>::BasicTensor() : impl_(std::make_shared<detail::TensorImpl<T>>())
{
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : impl_(std::make_shared<detail::TensorImpl<T>>())
{
    for (auto extent : shape)
        if (extent <= 0)
            throw ShapeError("tensor extents must be positive, got " + to_string(shape));
    if (sinterp::numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("shape " + to_string(shape) + " holds " + std::to_string(sinterp::numel(shape))
                         + " values but " + std::to_string(data.size()) + " were given");
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape)
{
    const auto n = sinterp::numel(shape);
    return BasicTensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(std::max<std::int64_t>(n, 0))));
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value)
{
    const auto n = sinterp::numel(shape);
    return BasicTensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)), value));
}

template <class T>
BasicTensor<T> BasicTensor<T>::from_impl(std::shared_ptr<detail::TensorImpl<T>> impl)
{
    BasicTensor t;
    t.impl_ = std::move(impl);
    return t;
}

template <class T>
T BasicTensor<T>::item() const
{
    if (impl_->data.size() != 1)
        throw ShapeError("item() needs a single-element tensor, got " + to_string(impl_->shape));
    return impl_->data[0];
}

template <class T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool flag)
{
    impl_->requires_grad = flag;
    return *this;
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const
{
    return BasicTensor(impl_->shape, impl_->data);
}

template <class T>
void BasicTensor<T>::backward() const
{
    if (impl_->data.size() != 1)
        throw ShapeError("backward() starts from a scalar, got " + to_string(impl_->shape));
    if (!impl_->requires_grad)
        throw ValidationError("backward() on a tensor that does not require grad");

    // Post-order DFS gives inputs before consumers; walk it in reverse.
    std::vector<detail::TensorImpl<T>*> order;
    std::unordered_set<const detail::TensorImpl<T>*> visited;
    std::vector<std::pair<detail::TensorImpl<T>*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (node->node && next < node->node->inputs.size()) {
            auto* child = node->node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }

    impl_->grad.assign(1, T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* t = *it;
        if (t->node && !t->grad.empty())
            t->node->backward(*t);
    }
    for (auto* t : order) {
        if (t->node) {
            t->node.reset();
            if (t != impl_.get())
                t->grad.clear();
        }
    }
}

template <class T>
BasicTensor<T> make_op_result(Shape shape, std::vector<T> data,
                              std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs,
                              std::function<void(const detail::TensorImpl<T>&)> backward)
{
#ifndef NDEBUG
    bool inputs_finite = true;
    for (const auto& in : inputs)
        for (T v : in->data)
            inputs_finite = inputs_finite && std::isfinite(v);
    if (inputs_finite)
        for (T v : data)
            if (!std::isfinite(v))
                throw ValidationError("op produced a non-finite value from finite inputs");
#endif
    auto impl = std::make_shared<detail::TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    const bool record = grad_enabled()
                        && std::any_of(inputs.begin(), inputs.end(),
                                       [](const auto& in) { return in->requires_grad; });
    if (record) {
        impl->requires_grad = true;
        impl->node = std::make_shared<detail::GradNode<T>>();
        impl->node->inputs = std::move(inputs);
        impl->node->backward = std::move(backward);
    }
    return BasicTensor<T>::from_impl(std::move(impl));
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      first_moment(static_cast<std::size_t>(value.numel()), 0.0f),
      second_moment(static_cast<std::size_t>(value.numel()), 0.0f)
{
    value.set_requires_grad(true);
}

template struct detail::TensorImpl<float>;
template struct detail::TensorImpl<double>;
template class BasicTensor<float>;
template class BasicTensor<double>;
template Tensor make_op_result(Shape, std::vector<float>, std::vector<std::shared_ptr<detail::TensorImpl<float>>>,
                               std::function<void(const detail::TensorImpl<float>&)>);
template Tensor64 make_op_result(Shape, std::vector<double>,
                                 std::vector<std::shared_ptr<detail::TensorImpl<double>>>,
                                 std::function<void(const detail::TensorImpl<double>&)>);

} // namespace sinterp
