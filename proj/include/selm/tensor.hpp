#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace selm {

#ifdef SELM_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using i64 = std::int64_t;

/// Global epsilon used by standardize / layer_norm / instance normalization
/// unless a caller overrides it.
inline constexpr Real kEps = Real(1e-5);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

i64 numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Dense row-major tensor. Doubles as a node in the reverse-mode graph:
/// ops link results to their inputs via `parents_` and store a pull-style
/// backward closure. Plain value use (shape + data) ignores the graph fields.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<Real> data;
    bool requires_grad = false;
    std::vector<Real> grad; // same size as data once a backward pass touches this node

    Tensor() = default;
    explicit Tensor(std::vector<int> s, Real fill = Real(0));
    Tensor(std::vector<int> s, std::vector<Real> d);

    int ndim() const { return static_cast<int>(shape.size()); }
    i64 numel() const { return static_cast<i64>(data.size()); }
    int extent(int axis) const { return shape[static_cast<size_t>(axis)]; }

    Real& at(i64 i) { return data[static_cast<size_t>(i)]; }
    Real at(i64 i) const { return data[static_cast<size_t>(i)]; }

    void ensure_grad();
    void zero_grad();

    static TensorPtr make(std::vector<int> shape, Real fill = Real(0));
    static TensorPtr make(std::vector<int> shape, std::vector<Real> data);
    /// Graph leaf holding `value`; requires_grad marks it as differentiable.
    static TensorPtr leaf(Tensor value, bool requires_grad);

    // Graph linkage, managed by the ops in autodiff.hpp.
    using BackwardFn = std::function<void(const Tensor& self)>;
    const std::vector<TensorPtr>& parents() const { return parents_; }
    bool has_backward() const { return static_cast<bool>(backward_); }
    void set_edges(std::vector<TensorPtr> parents, BackwardFn fn);
    void run_backward() const { if (backward_) backward_(*this); }

private:
    std::vector<TensorPtr> parents_;
    BackwardFn backward_;
};

bool all_finite(const Tensor& t);

/// Throws std::runtime_error naming `where` if t contains NaN/Inf.
void check_finite(const Tensor& t, const std::string& where);

/// Reverse pass from a scalar root. Accumulates into .grad of every node on
/// the differentiable path; leaf grads persist until explicitly zeroed.
void backward(const TensorPtr& root);

/// While alive on a thread, ops on that thread record no graph edges.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

} // namespace selm
