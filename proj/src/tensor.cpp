#include "selm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace selm {

i64 numel_of(const std::vector<int>& shape) {
    i64 n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> s, Real fill)
    : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != static_cast<i64>(data.size())) {
        throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    }
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), Real(0));
}

TensorPtr Tensor::make(std::vector<int> shape, Real fill) {
    return std::make_shared<Tensor>(std::move(shape), fill);
}

TensorPtr Tensor::make(std::vector<int> shape, std::vector<Real> data) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data));
}

TensorPtr Tensor::leaf(Tensor value, bool requires_grad) {
    auto t = std::make_shared<Tensor>(std::move(value));
    t->requires_grad = requires_grad;
    return t;
}

void Tensor::set_edges(std::vector<TensorPtr> parents, BackwardFn fn) {
    parents_ = std::move(parents);
    backward_ = std::move(fn);
}

bool all_finite(const Tensor& t) {
    for (Real v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_finite(const Tensor& t, const std::string& where) {
    if (!all_finite(t)) throw std::runtime_error(where + ": non-finite value encountered");
}

namespace {
thread_local int g_no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

void backward(const TensorPtr& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->numel() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root->shape));
    }
    if (!root->requires_grad) return;

    // Post-order DFS over the differentiable subgraph, then run closures in
    // reverse topological order.
    std::vector<Tensor*> topo;
    std::unordered_set<Tensor*> seen;
    struct Frame { Tensor* node; size_t next; };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        const auto& ps = f.node->parents();
        if (f.next < ps.size()) {
            Tensor* p = ps[f.next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    for (Tensor* n : topo) n->ensure_grad();
    root->grad[0] = Real(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) (*it)->run_backward();
}

} // namespace selm
