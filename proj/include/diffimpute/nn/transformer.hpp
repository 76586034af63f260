#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "diffimpute/nn/tokenizer.hpp"

namespace diffimpute::nn {

inline std::string transformer_block_name(std::size_t i) { return "tf.block" + std::to_string(i); }

template <class Real>
void init_transformer(const DenoiserConfig& cfg, ParamStore<Real>& params, Rng& rng) {
    const std::size_t d = cfg.d, ffn = cfg.transformer_ffn_hidden();
    if (cfg.time_embedding) TimeStepTokenizer("tf.tok", ffn).init(params, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    const auto uniform = [&](Shape s) {
        Tensor<Real> t(std::move(s));
        for (auto& v : t.storage()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
        return t;
    };
    params.add("tf.features.w", uniform({cfg.k, d}));
    params.add("tf.features.b", uniform({cfg.k, d}));
    params.add("tf.cls", uniform({1, d}));
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const std::string b = transformer_block_name(i);
        add_norm(params, b + ".ln0", d);
        for (const char* proj : {".attn.q", ".attn.k", ".attn.v", ".attn.o"})
            add_linear_kaiming(params, b + proj, d, d, rng);
        add_norm(params, b + ".ln1", d);
        add_linear_kaiming(params, b + ".ffn.in", d, 2 * ffn, rng);
        add_linear_kaiming(params, b + ".ffn.out", ffn, d, rng);
    }
    add_norm(params, "tf.pred.ln", d);
    add_linear_kaiming(params, "tf.pred.out", d, 1, rng);
}

template <class Real>
Var<Real> apply_layer_norm(const NetContext<Real>& ctx, Var<Real> x, const std::string& name) {
    return ops::layer_norm(x, ctx.p(name + ".gamma"), ctx.p(name + ".beta"));
}

/// Pre-norm residual block pair: MHSA, then the time-conditioned ReGLU FFN.
template <class Real>
Var<Real> transformer_block(const NetContext<Real>& ctx, Var<Real> h, const std::optional<Var<Real>>& t_emb,
                            const std::string& b) {
    const DenoiserConfig& cfg = ctx.config;
    Var<Real> z = self_attention(ctx, apply_layer_norm(ctx, h, b + ".ln0"), b + ".attn", cfg.heads);
    h = ops::add(h, ops::dropout(z, cfg.residual_dropout, ctx.training, ctx.rng));

    z = apply_linear(ctx, apply_layer_norm(ctx, h, b + ".ln1"), b + ".ffn.in");
    z = ops::reglu(z);
    if (t_emb) z = ops::film(z, *t_emb, 2);
    z = ops::dropout(z, cfg.ffn_dropout, ctx.training, ctx.rng);
    z = apply_linear(ctx, z, b + ".ffn.out");
    return ops::add(h, ops::dropout(z, cfg.residual_dropout, ctx.training, ctx.rng));
}

/// Feature tokenizer + [CLS] token, transformer blocks, then a shared per-token
/// Linear(ReLU(LayerNorm)) head on the k feature tokens (CLS dropped). x [B, k] -> [B, k].
template <class Real>
Var<Real> transformer_forward(const NetContext<Real>& ctx, Var<Real> x, std::span<const double> t) {
    const DenoiserConfig& cfg = ctx.config;
    const std::size_t batch = x.dim(0);
    std::optional<Var<Real>> t_emb;
    if (cfg.time_embedding) t_emb = TimeStepTokenizer("tf.tok", cfg.transformer_ffn_hidden()).forward(ctx, t);
    Var<Real> tokens = ops::feature_tokenize(x, ctx.p("tf.features.w"), ctx.p("tf.features.b"));
    Var<Real> cls = ops::broadcast_batch(ctx.p("tf.cls"), batch);
    Var<Real> h = ops::concat(cls, tokens, 1);
    for (std::size_t i = 0; i < cfg.blocks; ++i) h = transformer_block(ctx, h, t_emb, transformer_block_name(i));
    h = ops::slice(h, 1, 1, cfg.k);
    h = ops::relu(apply_layer_norm(ctx, h, "tf.pred.ln"));
    h = apply_linear(ctx, h, "tf.pred.out");
    return ops::reshape(h, Shape{batch, cfg.k});
}

} // namespace diffimpute::nn
