#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffimpute/nn/tokenizer.hpp"

namespace diffimpute::nn {

/// Channel plan of one U-Net stage.
struct UNetStage {
    std::string name;
    std::size_t in_channels;
    std::size_t out_channels;
};

/// Encoder stages, the bottleneck, then decoder stages, in execution order.
/// Decoder i consumes concat(previous output, encoder i output).
inline std::vector<UNetStage> unet_stages(const DenoiserConfig& cfg) {
    const auto& ch = cfg.unet_channels;
    std::vector<UNetStage> stages;
    for (std::size_t i = 0; i < ch.size(); ++i)
        stages.push_back({"unet.enc" + std::to_string(i), i == 0 ? 1 : ch[i - 1], ch[i]});
    stages.push_back({"unet.mid", ch.back(), ch.back()});
    std::size_t current = ch.back();
    for (std::size_t i = ch.size(); i-- > 0;) {
        const std::size_t out = i == 0 ? 1 : ch[i - 1];
        stages.push_back({"unet.dec" + std::to_string(i), current + ch[i], out});
        current = out;
    }
    return stages;
}

inline std::size_t unet_groups(const DenoiserConfig& cfg, std::size_t channels) {
    return std::gcd(channels, cfg.unet_groups);
}

inline std::size_t unet_heads(const DenoiserConfig& cfg, std::size_t channels) {
    return std::gcd(channels, cfg.heads);
}

template <class Real>
void init_unet(const DenoiserConfig& cfg, ParamStore<Real>& params, Rng& rng) {
    for (const auto& s : unet_stages(cfg)) {
        if (cfg.time_embedding) TimeStepTokenizer(s.name + ".tok", s.out_channels).init(params, rng);
        add_conv1d(params, s.name + ".conv0", s.in_channels, s.out_channels, 3, rng);
        add_norm(params, s.name + ".gn0", s.out_channels);
        add_conv1d(params, s.name + ".conv1", s.out_channels, s.out_channels, 3, rng);
        add_norm(params, s.name + ".gn1", s.out_channels);
        if (s.in_channels != s.out_channels) add_conv1d(params, s.name + ".skip", s.in_channels, s.out_channels, 1, rng);
        add_norm(params, s.name + ".res", s.out_channels);
        for (const char* proj : {".attn.q", ".attn.k", ".attn.v", ".attn.o"})
            add_linear(params, s.name + proj, s.out_channels, s.out_channels, rng);
    }
    add_linear(params, "unet.out", cfg.k, cfg.k, rng);
}

template <class Real>
Var<Real> apply_group_norm(const NetContext<Real>& ctx, Var<Real> x, const std::string& name) {
    const std::size_t groups = unet_groups(ctx.config, x.dim(1));
    return ops::group_norm(x, ctx.p(name + ".gamma"), ctx.p(name + ".beta"), groups);
}

template <class Real>
Var<Real> apply_conv(const NetContext<Real>& ctx, Var<Real> x, const std::string& name) {
    return ops::conv1d(x, ctx.p(name + ".w"), ctx.p(name + ".b"));
}

/// One U-Net stage on [B, C_in, L]:
///   z = SiLU(GN(Conv(SiLU(FiLM(GN(Conv(x))))))) + skip(x)
///   z = GN(z) + z
///   out = MHSA over the L positions of z
/// skip is the identity when the channel counts agree, else a 1x1 convolution.
template <class Real>
Var<Real> unet_stage(const NetContext<Real>& ctx, Var<Real> x, const UNetStage& s, std::span<const double> t) {
    const DenoiserConfig& cfg = ctx.config;
    Var<Real> z = apply_group_norm(ctx, apply_conv(ctx, x, s.name + ".conv0"), s.name + ".gn0");
    if (cfg.time_embedding) {
        Var<Real> t_emb = TimeStepTokenizer(s.name + ".tok", s.out_channels).forward(ctx, t);
        z = ops::film(z, t_emb, 1);
    }
    z = ops::dropout(z, cfg.ffn_dropout, ctx.training, ctx.rng);
    z = ops::silu(z);
    z = ops::silu(apply_group_norm(ctx, apply_conv(ctx, z, s.name + ".conv1"), s.name + ".gn1"));
    Var<Real> skip = s.in_channels == s.out_channels ? x : apply_conv(ctx, x, s.name + ".skip");
    z = ops::add(z, skip);
    z = ops::add(apply_group_norm(ctx, z, s.name + ".res"), z);
    Var<Real> seq = ops::swap_last_two(z);
    seq = self_attention(ctx, seq, s.name + ".attn", unet_heads(cfg, s.out_channels));
    return ops::swap_last_two(seq);
}

/// The feature vector is a one-channel length-k sequence; encoder stages widen
/// the channels, decoder stages narrow them back to one with skip concatenation,
/// and a final Linear maps the k positions to the noise estimate. x [B, k] -> [B, k].
template <class Real>
Var<Real> unet_forward(const NetContext<Real>& ctx, Var<Real> x, std::span<const double> t) {
    const DenoiserConfig& cfg = ctx.config;
    const std::size_t batch = x.dim(0), levels = cfg.unet_channels.size();
    const auto stages = unet_stages(cfg);
    Var<Real> h = ops::reshape(x, Shape{batch, 1, cfg.k});
    std::vector<Var<Real>> skips;
    for (std::size_t i = 0; i < levels; ++i) {
        h = unet_stage(ctx, h, stages[i], t);
        skips.push_back(h);
    }
    h = unet_stage(ctx, h, stages[levels], t);
    for (std::size_t j = 0; j < levels; ++j) {
        const std::size_t level = levels - 1 - j;
        h = ops::concat(h, skips[level], 1);
        h = unet_stage(ctx, h, stages[levels + 1 + j], t);
    }
    h = ops::reshape(h, Shape{batch, cfg.k});
    return apply_linear(ctx, h, "unet.out");
}

} // namespace diffimpute::nn
