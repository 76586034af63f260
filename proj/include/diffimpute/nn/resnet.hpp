#pragma once

#include <optional>
#include <span>
#include <string>

#include "diffimpute/nn/tokenizer.hpp"

namespace diffimpute::nn {

inline std::string resnet_block_name(std::size_t i) { return "resnet.block" + std::to_string(i); }

template <class Real>
void init_resnet(const DenoiserConfig& cfg, ParamStore<Real>& params, ParamStore<Real>& buffers, Rng& rng) {
    const std::size_t inner = cfg.hidden * cfg.resnet_factor;
    if (cfg.time_embedding) TimeStepTokenizer("resnet.tok", inner).init(params, rng);
    add_linear(params, "resnet.in", cfg.k, cfg.hidden, rng);
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const std::string b = resnet_block_name(i);
        add_batch_norm(params, buffers, b + ".bn", cfg.hidden);
        add_linear(params, b + ".mlp", cfg.hidden, inner, rng);
        add_linear(params, b + ".out", inner, cfg.hidden, rng);
    }
    add_batch_norm(params, buffers, "resnet.pred.bn", cfg.hidden);
    add_linear(params, "resnet.pred.out", cfg.hidden, cfg.k, rng);
}

template <class Real>
Var<Real> apply_batch_norm(const NetContext<Real>& ctx, Var<Real> x, const std::string& name) {
    return ops::batch_norm(x, ctx.p(name + ".gamma"), ctx.p(name + ".beta"), ctx.bn_buffers(name), ctx.training);
}

/// Linear stem, residual blocks x + Dropout(Linear(TimeStepMLP(BatchNorm(x)))),
/// then Linear(ReLU(BatchNorm(x))). x [B, k] -> [B, k].
template <class Real>
Var<Real> resnet_forward(const NetContext<Real>& ctx, Var<Real> x, std::span<const double> t) {
    const DenoiserConfig& cfg = ctx.config;
    std::optional<Var<Real>> t_emb;
    if (cfg.time_embedding) t_emb = TimeStepTokenizer("resnet.tok", cfg.hidden * cfg.resnet_factor).forward(ctx, t);
    Var<Real> h = apply_linear(ctx, x, "resnet.in");
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const std::string b = resnet_block_name(i);
        Var<Real> z = apply_batch_norm(ctx, h, b + ".bn");
        z = timestep_mlp_block(ctx, z, t_emb, b + ".mlp", cfg.ffn_dropout);
        z = apply_linear(ctx, z, b + ".out");
        z = ops::dropout(z, cfg.residual_dropout, ctx.training, ctx.rng);
        h = ops::add(h, z);
    }
    h = ops::relu(apply_batch_norm(ctx, h, "resnet.pred.bn"));
    return apply_linear(ctx, h, "resnet.pred.out");
}

} // namespace diffimpute::nn
