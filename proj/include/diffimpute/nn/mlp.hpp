#pragma once

#include <optional>
#include <span>
#include <string>

#include "diffimpute/nn/tokenizer.hpp"

namespace diffimpute::nn {

inline std::string mlp_block_name(std::size_t i) { return "mlp.block" + std::to_string(i); }

template <class Real>
void init_mlp(const DenoiserConfig& cfg, ParamStore<Real>& params, Rng& rng) {
    if (cfg.time_embedding) TimeStepTokenizer("mlp.tok", cfg.hidden).init(params, rng);
    for (std::size_t i = 0; i < cfg.blocks; ++i)
        add_linear(params, mlp_block_name(i), i == 0 ? cfg.k : cfg.hidden, cfg.hidden, rng);
    add_linear(params, "mlp.head", cfg.hidden, cfg.k, rng);
}

/// Linear head over a stack of time-conditioned MLP blocks. x [B, k] -> [B, k].
template <class Real>
Var<Real> mlp_forward(const NetContext<Real>& ctx, Var<Real> x, std::span<const double> t) {
    const DenoiserConfig& cfg = ctx.config;
    std::optional<Var<Real>> t_emb;
    if (cfg.time_embedding) t_emb = TimeStepTokenizer("mlp.tok", cfg.hidden).forward(ctx, t);
    Var<Real> h = x;
    for (std::size_t i = 0; i < cfg.blocks; ++i) h = timestep_mlp_block(ctx, h, t_emb, mlp_block_name(i), cfg.ffn_dropout);
    return apply_linear(ctx, h, "mlp.head");
}

} // namespace diffimpute::nn
