#pragma once

#include <string>
#include <vector>

#include "diffimpute/denoiser.hpp"
#include "gradcheck.hpp"

namespace gradcheck {

using diffimpute::Architecture;
using diffimpute::DenoiserConfig;

/// Smallest configurations that still exercise every layer of each backbone.
inline DenoiserConfig tiny_config(Architecture arch) {
    DenoiserConfig c;
    c.arch = arch;
    switch (arch) {
    case Architecture::mlp:
        c.k = 3;
        c.blocks = 2;
        c.hidden = 5;
        break;
    case Architecture::resnet:
        c.k = 3;
        c.blocks = 2;
        c.hidden = 4;
        c.resnet_factor = 2;
        c.residual_dropout = 0.1;
        break;
    case Architecture::transformer:
        c.k = 3;
        c.blocks = 1;
        c.d = 8;
        c.heads = 2;
        break;
    case Architecture::unet:
        c.k = 8;
        c.unet_channels = {4, 8};
        c.unet_groups = 2;
        c.heads = 2;
        break;
    }
    return c;
}

struct DenoiserCheck {
    double input_error = 0;
    double worst_param_error = 0;
    std::string worst_param;
    std::size_t params_checked = 0;
};

/// Central differences over every parameter and the input of a training-mode
/// forward pass. Dropout masks repeat because the rng is reseeded per pass.
inline DenoiserCheck check_denoiser(const DenoiserConfig& cfg, double h = 1e-5) {
    using namespace diffimpute;
    Denoiser<double> model(cfg, 11);
    const std::size_t batch = 4;
    Rng data_rng(12);
    Tensor<double> x = sample_gaussian<double>(data_rng, {batch, cfg.k});
    const std::vector<double> t{1.0, 17.0, 250.5, 999.0};

    const auto loss_of = [&](Graph<double>& g, Var<double> xv) {
        Rng rng(42);
        return weighted_sum(model.forward(g, xv, t, true, &rng), 7);
    };
    // snapshot batch-norm buffers so every pass starts from the same state
    const ParamStore<double> buffers = model.buffers();
    const auto restore = [&] { model.buffers() = buffers; };

    Tensor<double> x_grad;
    model.params().zero_grad();
    {
        Graph<double> g;
        Var<double> xv = g.input(x);
        g.backward(loss_of(g, xv));
        x_grad = g.grad(xv);
    }
    restore();
    const auto eval = [&](const Tensor<double>& xin) {
        Graph<double> g(false);
        const double v = loss_of(g, g.constant(xin)).value()[0];
        restore();
        return v;
    };

    DenoiserCheck out;
    Tensor<double> x_num(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        x_num[i] = (eval(xp) - eval(xm)) / (2 * h);
    }
    out.input_error = rel_error(x_grad, x_num);

    for (auto& e : model.params().entries()) {
        Tensor<double> num(e.value.shape());
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double orig = e.value[i];
            e.value[i] = orig + h;
            const double up = eval(x);
            e.value[i] = orig - h;
            const double down = eval(x);
            e.value[i] = orig;
            num[i] = (up - down) / (2 * h);
        }
        const double err = rel_error(e.grad, num);
        if (err > out.worst_param_error || out.worst_param.empty()) {
            out.worst_param_error = std::max(out.worst_param_error, err);
            if (err >= out.worst_param_error) out.worst_param = e.name;
        }
        ++out.params_checked;
    }
    return out;
}

} // namespace gradcheck
