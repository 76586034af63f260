#pragma once

#include <cmath>
#include <string>

#include "diffimpute/core/graph.hpp"
#include "diffimpute/core/ops.hpp"
#include "diffimpute/core/param_store.hpp"
#include "diffimpute/core/rng.hpp"
#include "diffimpute/nn/denoiser_config.hpp"

namespace diffimpute::nn {

/// Everything a network forward pass reads or writes.
///
/// In training, `trainable` and `mutable_buffers` point at the owning
/// denoiser's stores so that parameters are bound for backward and batch-norm
/// running statistics update. In inference both are null and parameters enter
/// the graph as constants.
template <class Real>
struct NetContext {
    Graph<Real>& graph;
    const ParamStore<Real>& params;
    ParamStore<Real>* trainable = nullptr;
    const ParamStore<Real>& buffers;
    ParamStore<Real>* mutable_buffers = nullptr;
    const DenoiserConfig& config;
    bool training = false;
    Rng* rng = nullptr;

    Var<Real> p(const std::string& name) const {
        if (trainable) return graph.param(*trainable, name);
        return graph.constant(params.value(name));
    }

    ops::BatchNormBuffers<Real> bn_buffers(const std::string& name) const {
        ops::BatchNormBuffers<Real> b;
        if (mutable_buffers) {
            b.running_mean = &mutable_buffers->value(name + ".running_mean");
            b.running_var = &mutable_buffers->value(name + ".running_var");
        } else {
            // eval-mode batch_norm only reads the running statistics
            b.running_mean = const_cast<Tensor<Real>*>(&buffers.value(name + ".running_mean"));
            b.running_var = const_cast<Tensor<Real>*>(&buffers.value(name + ".running_var"));
        }
        return b;
    }
};

// ---------------------------------------------------------------------------
// parameter registration helpers

/// Weight [in, out] and bias [out], both U(-1/sqrt(in), 1/sqrt(in)).
template <class Real>
void add_linear(ParamStore<Real>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor<Real> w(Shape{in, out});
    for (auto& v : w.storage()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    Tensor<Real> b(Shape{out});
    for (auto& v : b.storage()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    store.add(name + ".w", std::move(w));
    store.add(name + ".b", std::move(b));
}

/// Kaiming-normal weight (std sqrt(2 / in)) with zero bias.
template <class Real>
void add_linear_kaiming(ParamStore<Real>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
    Tensor<Real> w(Shape{in, out});
    for (auto& v : w.storage()) v = static_cast<Real>(rng.normal() * std_dev);
    store.add(name + ".w", std::move(w));
    store.add(name + ".b", Tensor<Real>(Shape{out}));
}

template <class Real>
void add_conv1d(ParamStore<Real>& store, const std::string& name, std::size_t cin, std::size_t cout,
                std::size_t kernel, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * kernel));
    Tensor<Real> w(Shape{cout, cin, kernel});
    for (auto& v : w.storage()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    Tensor<Real> b(Shape{cout});
    for (auto& v : b.storage()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    store.add(name + ".w", std::move(w));
    store.add(name + ".b", std::move(b));
}

/// gamma = 1, beta = 0.
template <class Real>
void add_norm(ParamStore<Real>& store, const std::string& name, std::size_t width) {
    store.add(name + ".gamma", Tensor<Real>(Shape{width}, Real(1)));
    store.add(name + ".beta", Tensor<Real>(Shape{width}));
}

template <class Real>
void add_batch_norm(ParamStore<Real>& store, ParamStore<Real>& buffers, const std::string& name, std::size_t width) {
    add_norm(store, name, width);
    buffers.add(name + ".running_mean", Tensor<Real>(Shape{width}));
    buffers.add(name + ".running_var", Tensor<Real>(Shape{width}, Real(1)));
}

template <class Real>
Var<Real> apply_linear(const NetContext<Real>& ctx, Var<Real> x, const std::string& name) {
    return ops::linear(x, ctx.p(name + ".w"), ctx.p(name + ".b"));
}

} // namespace diffimpute::nn
