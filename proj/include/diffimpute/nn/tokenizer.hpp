#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffimpute/core/ops.hpp"
#include "diffimpute/nn/context.hpp"

namespace diffimpute::nn {

/// Fixed sinusoid pair for time step t at width `dim`:
/// scale_i = sin(t * w_i), shift_i = cos(t * w_i), w_i = exp(-ln(1e4) * i / dim).
inline std::pair<std::vector<double>, std::vector<double>> sinusoid_embed(double t, std::size_t dim) {
    if (t < 0) throw InputError("sinusoid_embed: time step must be >= 0");
    if (dim < 1) throw InputError("sinusoid_embed: width must be >= 1");
    std::vector<double> scale(dim), shift(dim);
    const double log_base = std::log(1e4);
    for (std::size_t i = 0; i < dim; ++i) {
        const double freq = std::exp(-log_base * static_cast<double>(i) / static_cast<double>(dim));
        scale[i] = std::sin(t * freq);
        shift[i] = std::cos(t * freq);
    }
    return {std::move(scale), std::move(shift)};
}

/// Learnable time-step tokenizer producing the FiLM (scale, shift) pair.
///
/// Linear -> GELU -> Linear -> SiLU -> Linear applied to the concatenated
/// sinusoid pair; every layer is 2*dim wide. Output [B, 2*dim] holds the
/// scale embedding in the first half and the shift embedding in the second.
class TimeStepTokenizer {
public:
    TimeStepTokenizer() = default;
    TimeStepTokenizer(std::string prefix, std::size_t dim) : prefix_(std::move(prefix)), dim_(dim) {}

    std::size_t dim() const { return dim_; }
    const std::string& prefix() const { return prefix_; }

    template <class Real>
    void init(ParamStore<Real>& store, Rng& rng) const {
        for (int l = 0; l < 3; ++l) add_linear(store, layer(l), 2 * dim_, 2 * dim_, rng);
    }

    /// Embeddings for per-row time steps. Distinct values are computed once and gathered.
    template <class Real>
    Var<Real> forward(const NetContext<Real>& ctx, std::span<const double> t) const {
        std::vector<double> uniq(t.begin(), t.end());
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        Tensor<Real> sin_cos(Shape{uniq.size(), 2 * dim_});
        for (std::size_t u = 0; u < uniq.size(); ++u) {
            auto [s, c] = sinusoid_embed(uniq[u], dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
                sin_cos.at(u, i) = static_cast<Real>(s[i]);
                sin_cos.at(u, dim_ + i) = static_cast<Real>(c[i]);
            }
        }
        Var<Real> h = ctx.graph.constant(std::move(sin_cos));
        h = ops::gelu(apply_linear(ctx, h, layer(0)));
        h = ops::silu(apply_linear(ctx, h, layer(1)));
        h = apply_linear(ctx, h, layer(2));
        if (uniq.size() == t.size() && std::equal(uniq.begin(), uniq.end(), t.begin())) return h;
        std::vector<std::size_t> index(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            index[i] = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), t[i]) - uniq.begin());
        return ops::gather_rows(h, std::move(index));
    }

    std::string layer(int l) const { return prefix_ + ".l" + std::to_string(l); }

private:
    std::string prefix_;
    std::size_t dim_ = 0;
};

/// x * (scale + 1) + shift for a single row; `t_emb` holds [scale, shift].
inline std::vector<double> apply_film(std::span<const double> x, std::span<const double> t_emb) {
    if (t_emb.size() != 2 * x.size())
        throw ShapeError("apply_film: embedding length " + std::to_string(t_emb.size()) + " != 2 * " +
                         std::to_string(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (t_emb[i] + 1.0) + t_emb[x.size() + i];
    return out;
}

/// Dropout(ReLU(FiLM(Linear(x), t_emb))) over the last axis of x.
/// With `t_emb` absent the FiLM stage is the identity.
template <class Real>
Var<Real> timestep_mlp_block(const NetContext<Real>& ctx, Var<Real> x, const std::optional<Var<Real>>& t_emb,
                             const std::string& linear_name, double dropout) {
    Var<Real> h = apply_linear(ctx, x, linear_name);
    if (t_emb) h = ops::film(h, *t_emb, h.shape().size() - 1);
    h = ops::relu(h);
    return ops::dropout(h, dropout, ctx.training, ctx.rng);
}

/// Multi-head self-attention over [B, T, d] with q/k/v/out projections under `name`.
template <class Real>
Var<Real> self_attention(const NetContext<Real>& ctx, Var<Real> x, const std::string& name, std::size_t heads) {
    Var<Real> q = apply_linear(ctx, x, name + ".q");
    Var<Real> k = apply_linear(ctx, x, name + ".k");
    Var<Real> v = apply_linear(ctx, x, name + ".v");
    Var<Real> a = ops::attention(q, k, v, heads, ctx.config.attention_dropout, ctx.training, ctx.rng);
    return apply_linear(ctx, a, name + ".o");
}

} // namespace diffimpute::nn
