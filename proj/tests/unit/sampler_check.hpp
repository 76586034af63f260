#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "diffimpute/sampling.hpp"

namespace samplercheck {

using namespace diffimpute;

/// Largest |ddim(eta=1, t -> t-1) - ddpm(t)| over every step of a schedule, with shared noise.
inline double adjacent_step_gap(int T, std::uint64_t seed) {
    const auto sched = build_cosine_schedule(T);
    Rng rng(seed);
    double worst = 0;
    for (int t = 1; t <= T; ++t) {
        auto x = sample_gaussian<double>(rng, {6, 3});
        auto eps = sample_gaussian<double>(rng, {6, 3});
        auto noise = sample_gaussian<double>(rng, {6, 3});
        auto a = ddpm_step(sched, x, t, eps, noise);
        auto b = impute_ddim_step(sched, x, t, t - 1, eps, 1.0, noise);
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

inline Denoiser<double> small_model(std::size_t k, std::uint64_t seed, Architecture arch = Architecture::mlp) {
    DenoiserConfig c;
    c.arch = arch;
    c.k = k;
    c.hidden = 16;
    c.blocks = 2;
    c.d = 8;
    c.heads = 2;
    c.unet_channels = {4, 8};
    return Denoiser<double>(c, seed);
}

inline MaskedTable<double> random_table(std::size_t n, std::size_t k, const MaskSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> x({n, k});
    for (auto& v : x.storage()) v = rng.uniform();
    return MaskedTable<double>(std::move(x), spec.generate(n, k));
}

/// Largest per-step state difference between the ancestral and the DDIM
/// (eta = 1) steppers on a dense plan with harmonization.
inline double trajectory_gap(const Denoiser<double>& model, const MaskedTable<double>& table, int T, int jn) {
    const auto sched = build_cosine_schedule(T);
    SamplerOptions o;
    o.T_sampling = T;
    o.eta = 1.0;
    o.jump_n_sample = jn;
    o.seed = 77;
    std::vector<Tensor<double>> a, b;
    o.stepper = Stepper::ddpm;
    auto ra = impute_once<double>(model, table, sched, o, 0, [&](const SamplerEvent<double>& e) { a.push_back(e.x); });
    o.stepper = Stepper::ddim;
    auto rb = impute_once<double>(model, table, sched, o, 0, [&](const SamplerEvent<double>& e) { b.push_back(e.x); });
    if (a.size() != b.size() || a.empty()) return INFINITY;
    a.push_back(ra);
    b.push_back(rb);
    double worst = 0;
    for (std::size_t s = 0; s < a.size(); ++s)
        for (std::size_t i = 0; i < a[s].size(); ++i) worst = std::max(worst, std::abs(a[s][i] - b[s][i]));
    return worst;
}

/// Number of (mask, seed) cases whose imputed known entries differ from the observations.
inline int known_mismatches(int cases, std::uint64_t seed) {
    const std::size_t n = 12, k = 5;
    const auto model = small_model(k, 3);
    const auto sched = build_cosine_schedule(20);
    Rng pick(seed);
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
        const std::uint64_t s = pick.next_u64();
        MaskSpec spec = c % 2 == 0 ? MaskSpec::mcar(0.1 * static_cast<double>(1 + (c / 2) % 9), s)
                                   : MaskSpec::mar(1 + (c / 2) % 4, s);
        const auto table = random_table(n, k, spec, s + 1);
        SamplerOptions o;
        o.T_sampling = 20;
        o.n_inferences = 3;
        o.seed = s;
        if (c % 3 == 1) o.tau = 5;
        if (c % 4 == 2) o.jump_n_sample = 3;
        const auto out = impute(model, table, sched, o);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (table.mask.known[i] && out[i] != table.x_obs[i]) {
                ++bad;
                break;
            }
    }
    return bad;
}

} // namespace samplercheck
