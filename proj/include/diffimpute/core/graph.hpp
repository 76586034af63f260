#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/param_store.hpp"
#include "diffimpute/core/tensor.hpp"

namespace diffimpute {

template <class Real>
class Graph;

/// Handle to a value recorded on a Graph.
template <class Real = double>
struct Var {
    Graph<Real>* graph = nullptr;
    std::size_t id = 0;

    const Tensor<Real>& value() const { return graph->value(*this); }
    const Shape& shape() const { return value().shape(); }
    std::size_t dim(std::size_t axis) const { return value().dim(axis); }
};

/// Reverse-mode tape.
///
/// Every differentiable op pushes its output together with a closure that
/// scatters the output gradient into its inputs. `backward` replays the
/// closures in reverse creation order, then adds the gradients of parameter
/// leaves into their ParamStore slots. A graph built with `record = false`
/// keeps values only, which is what inference wants.
template <class Real = double>
class Graph {
public:
    using Backprop = std::function<void(Graph&, std::size_t)>;

    explicit Graph(bool record = true) : record_(record) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }

    Var<Real> constant(Tensor<Real> value) { return push(std::move(value), false, {}, "constant"); }

    /// Leaf whose gradient is kept and readable through `grad`.
    Var<Real> input(Tensor<Real> value) { return push(std::move(value), true, {}, "input"); }

    /// Leaf bound to a stored parameter; gradients flow into `store` on backward.
    Var<Real> param(ParamStore<Real>& store, const std::string& name) {
        const std::size_t index = store.index_of(name);
        Var<Real> v = push(store.entry(index).value, record_, {}, "parameter");
        if (record_) bindings_.push_back(Binding{v.id, &store, index});
        return v;
    }

    const Tensor<Real>& value(Var<Real> v) const { return nodes_[v.id].value; }
    bool requires_grad(Var<Real> v) const { return nodes_[v.id].requires_grad; }
    bool wants(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient accumulated at `v` by the last backward pass (zeros if none reached it).
    Tensor<Real> grad(Var<Real> v) const {
        const Node& n = nodes_[v.id];
        if (n.grad.empty()) return Tensor<Real>(n.value.shape());
        return n.grad;
    }

    void backward(Var<Real> loss) {
        if (!record_) throw InvariantError("backward on a graph that does not record");
        if (value(loss).size() != 1) throw ShapeError("backward requires a scalar loss, got shape " +
                                                      shape_str(value(loss).shape()));
        grad_slot(loss.id).fill(Real(1));
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backprop && !n.grad.empty()) n.backprop(*this, i);
        }
        for (const auto& b : bindings_) {
            const Node& n = nodes_[b.node];
            if (n.grad.empty()) continue;
            auto& dst = b.store->entry(b.index).grad.storage();
            const auto& src = n.grad.storage();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }

    // --- used by op implementations -------------------------------------

    /// Records `value`. `backprop` is kept only when recording and some input needs a gradient.
    Var<Real> push(Tensor<Real> value, bool requires_grad, Backprop backprop, const char* op) {
        value.check_finite(op);
        Node n;
        n.value = std::move(value);
        n.requires_grad = record_ && requires_grad;
        if (n.requires_grad) n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return Var<Real>{this, nodes_.size() - 1};
    }

    bool any_requires_grad(std::initializer_list<Var<Real>> vars) const {
        if (!record_) return false;
        for (auto v : vars)
            if (nodes_[v.id].requires_grad) return true;
        return false;
    }

    Tensor<Real>& grad_slot(std::size_t id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad = Tensor<Real>(n.value.shape());
        return n.grad;
    }
    Tensor<Real>& grad_slot(Var<Real> v) { return grad_slot(v.id); }
    const Tensor<Real>& out_grad(std::size_t id) const { return nodes_[id].grad; }
    const Tensor<Real>& value_at(std::size_t id) const { return nodes_[id].value; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<Real> value;
        Tensor<Real> grad;
        Backprop backprop;
        bool requires_grad = false;
    };
    struct Binding {
        std::size_t node;
        ParamStore<Real>* store;
        std::size_t index;
    };

    bool record_;
    std::deque<Node> nodes_;
    std::vector<Binding> bindings_;
};

} // namespace diffimpute
