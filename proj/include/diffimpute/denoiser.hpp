#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "diffimpute/core/graph.hpp"
#include "diffimpute/core/param_store.hpp"
#include "diffimpute/core/rng.hpp"
#include "diffimpute/nn/denoiser_config.hpp"
#include "diffimpute/nn/mlp.hpp"
#include "diffimpute/nn/resnet.hpp"
#include "diffimpute/nn/transformer.hpp"
#include "diffimpute/nn/unet.hpp"

namespace diffimpute {

/// Noise-prediction network f(x_t, t) -> eps_hat with one of four backbones.
///
/// Time steps are real-valued and given per row, so a batch may mix steps.
template <class Real = double>
class Denoiser {
public:
    Denoiser(DenoiserConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
        config_.validate();
        Rng rng(init_seed);
        switch (config_.arch) {
        case Architecture::mlp: nn::init_mlp(config_, params_, rng); break;
        case Architecture::resnet: nn::init_resnet(config_, params_, buffers_, rng); break;
        case Architecture::transformer: nn::init_transformer(config_, params_, rng); break;
        case Architecture::unet: nn::init_unet(config_, params_, rng); break;
        }
    }

    /// Rebuilds a network from stored tensors; names and shapes must match the config.
    Denoiser(DenoiserConfig config, const ParamStore<Real>& params, const ParamStore<Real>& buffers)
        : Denoiser(config, 0) {
        copy_matching(params, params_, "parameter");
        copy_matching(buffers, buffers_, "buffer");
    }

    const DenoiserConfig& config() const { return config_; }
    ParamStore<Real>& params() { return params_; }
    const ParamStore<Real>& params() const { return params_; }
    ParamStore<Real>& buffers() { return buffers_; }
    const ParamStore<Real>& buffers() const { return buffers_; }

    /// Forward pass with parameters bound for backward. Training mode enables
    /// dropout (drawing from `rng`) and batch statistics.
    Var<Real> forward(Graph<Real>& g, Var<Real> x, std::span<const double> t, bool training, Rng* rng) {
        nn::NetContext<Real> ctx{g, params_, &params_, buffers_, training ? &buffers_ : nullptr, config_, training, rng};
        return dispatch(ctx, x, t);
    }

    /// Inference-mode prediction; no tape, no state change.
    Tensor<Real> predict(const Tensor<Real>& x, std::span<const double> t) const {
        Graph<Real> g(false);
        nn::NetContext<Real> ctx{g, params_, nullptr, buffers_, nullptr, config_, false, nullptr};
        return dispatch(ctx, g.constant(x), t).value();
    }

private:
    Var<Real> dispatch(const nn::NetContext<Real>& ctx, Var<Real> x, std::span<const double> t) const {
        const Shape& xs = x.shape();
        if (xs.size() != 2 || xs[1] != config_.k)
            throw ShapeError("denoiser expects input [B, " + std::to_string(config_.k) + "], got " + shape_str(xs));
        if (t.size() != xs[0]) throw ShapeError("denoiser: need one time step per row");
        switch (config_.arch) {
        case Architecture::mlp: return nn::mlp_forward(ctx, x, t);
        case Architecture::resnet: return nn::resnet_forward(ctx, x, t);
        case Architecture::transformer: return nn::transformer_forward(ctx, x, t);
        case Architecture::unet: return nn::unet_forward(ctx, x, t);
        }
        throw InvariantError("unknown architecture");
    }

    static void copy_matching(const ParamStore<Real>& src, ParamStore<Real>& dst, const char* what) {
        if (src.size() != dst.size())
            throw InputError(std::string(what) + " count " + std::to_string(src.size()) + " does not match config (" +
                             std::to_string(dst.size()) + ")");
        for (const auto& e : src.entries()) {
            if (!dst.contains(e.name)) throw InputError(std::string("unexpected ") + what + " '" + e.name + "'");
            auto& target = dst.value(e.name);
            if (target.shape() != e.value.shape())
                throw InputError(std::string(what) + " '" + e.name + "' has shape " + shape_str(e.value.shape()) +
                                 ", config expects " + shape_str(target.shape()));
            target = e.value;
        }
    }

    DenoiserConfig config_;
    ParamStore<Real> params_;
    ParamStore<Real> buffers_;
};

} // namespace diffimpute
