#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "vcqe/tensor.hpp"

namespace vcqe {

inline std::uint64_t next_node_seq() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables graph recording in scope; forwards run as plain tensor math.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    Tensor<T>& ensure_grad() {
        if (grad.empty() && value.numel() > 0) grad = Tensor<T>(value.dims());
        return grad;
    }
};

// Handle to a graph node. Leaf vars hold values (inputs, parameters); op
// results carry a backprop closure that scatters their grad to parents.
template <typename T>
class Var {
public:
    Var() = default;

    explicit Var(Tensor<T> value, bool requires_grad = false) {
        n_ = std::make_shared<Node<T>>();
        n_->value = std::move(value);
        n_->requires_grad = requires_grad && grad_mode_flag();
        n_->seq = next_node_seq();
    }

    static Var make_result(Tensor<T> value, std::vector<Var> parents,
                           std::function<void(Node<T>&)> backprop) {
        bool track = grad_mode_flag();
        bool any = false;
        if (track) {
            for (const Var& p : parents)
                if (p.defined() && p.requires_grad()) any = true;
        }
        Var out;
        out.n_ = std::make_shared<Node<T>>();
        out.n_->value = std::move(value);
        out.n_->seq = next_node_seq();
        if (track && any) {
            out.n_->requires_grad = true;
            for (Var& p : parents)
                if (p.defined()) out.n_->parents.push_back(p.n_);
            out.n_->backprop = std::move(backprop);
        }
        return out;
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& mutable_value() { return n_->value; }
    const Tensor<T>& grad() const { return n_->grad; }
    Tensor<T>& ensure_grad() { return n_->ensure_grad(); }
    bool has_grad() const { return defined() && !n_->grad.empty(); }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    const std::vector<int>& dims() const { return n_->value.dims(); }
    int dim(int i) const { return n_->value.dim(i); }
    std::int64_t numel() const { return n_->value.numel(); }

    void zero_grad() { n_->grad = Tensor<T>(); }

    // New leaf carrying a copy of the value; gradients do not flow back.
    Var detach() const {
        Var out;
        out.n_ = std::make_shared<Node<T>>();
        out.n_->value = n_->value;
        out.n_->seq = next_node_seq();
        return out;
    }

    std::shared_ptr<Node<T>> node() const { return n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

// Reverse-mode sweep from a scalar root. Nodes are visited in reverse
// creation order, which is a topological order for define-by-run graphs.
template <typename T>
void backward(const Var<T>& root) {
    if (!root.defined()) throw std::runtime_error("backward: undefined root");
    if (root.numel() != 1) throw std::runtime_error("backward: root must be scalar");
    if (!root.requires_grad()) return;

    std::vector<std::shared_ptr<Node<T>>> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::shared_ptr<Node<T>>> stack{root.node()};
    while (!stack.empty()) {
        auto n = stack.back();
        stack.pop_back();
        if (!seen.insert(n.get()).second) continue;
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad) stack.push_back(p);
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a->seq > b->seq; });

    root.node()->ensure_grad();
    root.node()->grad[0] += T(1);
    for (auto& n : order) {
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

}  // namespace vcqe
