#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sinterp {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <class T>
class BasicTensor;

namespace detail {

template <class T>
struct TensorImpl;

/// Backward closure of one recorded op. `backward` reads the gradient of the
/// op's output and accumulates into the gradients of `inputs`.
template <class T>
struct GradNode
{
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    std::function<void(const TensorImpl<T>& out)> backward;
};

template <class T>
struct TensorImpl
{
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // empty until a gradient reaches this tensor
    bool requires_grad = false;
    std::shared_ptr<GradNode<T>> node;

    void accumulate_grad(std::span<const T> g);
};

} // namespace detail

/// Whether ops currently record a graph. Thread-local.
bool grad_enabled() noexcept;

/// Disables graph recording for the current thread while alive.
class NoGradGuard
{
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Dense row-major tensor with an optional gradient slot.
///
/// Copies are shallow: two handles to the same tensor share data, gradient and
/// graph position. Ops never write to their inputs; only the optimizer and the
/// owner of a leaf tensor mutate data in place.
template <class T>
class BasicTensor
{
public:
    using value_type = T;

    BasicTensor();
    BasicTensor(Shape shape, std::vector<T> data);

    static BasicTensor zeros(Shape shape);
    static BasicTensor full(Shape shape, T value);

    const Shape& shape() const noexcept { return impl_->shape; }
    std::int64_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t ndim() const noexcept { return impl_->shape.size(); }
    std::int64_t numel() const noexcept { return static_cast<std::int64_t>(impl_->data.size()); }

    std::span<const T> data() const noexcept { return impl_->data; }
    std::span<T> mutable_data() noexcept { return impl_->data; }
    T item() const;

    bool requires_grad() const noexcept { return impl_->requires_grad; }
    BasicTensor& set_requires_grad(bool flag);

    bool has_grad() const noexcept { return !impl_->grad.empty(); }
    std::span<const T> grad() const noexcept { return impl_->grad; }
    std::span<T> mutable_grad() noexcept { return impl_->grad; }
    void clear_grad() noexcept { impl_->grad.clear(); }

    /// Reverse-mode sweep from this scalar tensor. Releases the graph it
    /// walked, so a second call on the same result is an error.
    void backward() const;

    /// Same values, fresh storage, no graph.
    BasicTensor detach() const;

    const std::shared_ptr<detail::TensorImpl<T>>& impl() const noexcept { return impl_; }
    static BasicTensor from_impl(std::shared_ptr<detail::TensorImpl<T>> impl);

private:
    std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Wraps freshly computed op output. The backward closure is recorded only
/// when grad mode is on and some input requires a gradient.
template <class T>
BasicTensor<T> make_op_result(Shape shape, std::vector<T> data,
                              std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs,
                              std::function<void(const detail::TensorImpl<T>&)> backward);

/// Trainable tensor plus its Adam moment estimates.
struct Parameter
{
    Parameter(std::string name, Tensor value);

    std::string name;
    Tensor value;
    std::vector<float> first_moment;
    std::vector<float> second_moment;
    std::int64_t step = 0;
};

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

} // namespace sinterp
