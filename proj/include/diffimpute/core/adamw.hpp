#pragma once

#include <cmath>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/param_store.hpp"

namespace diffimpute {

struct AdamWOptions {
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates for AdamW, one pair per parameter in store order.
template <class Real = double>
struct AdamWState {
    AdamWOptions options;
    std::vector<Tensor<Real>> first_moment;
    std::vector<Tensor<Real>> second_moment;
    long long step = 0;

    AdamWState() = default;
    AdamWState(const ParamStore<Real>& params, AdamWOptions opts) : options(opts) {
        for (const auto& e : params.entries()) {
            first_moment.emplace_back(e.value.shape());
            second_moment.emplace_back(e.value.shape());
        }
    }
};

/// One AdamW update (decoupled weight decay, bias-corrected moments), then
/// zeroes every gradient slot.
template <class Real>
void adamw_step(ParamStore<Real>& params, AdamWState<Real>& state) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw InvariantError("AdamW state does not match parameter store");
    const AdamWOptions& o = state.options;
    ++state.step;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& entry = params.entry(p);
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        if (m.shape() != entry.value.shape() || v.shape() != entry.value.shape())
            throw InvariantError("AdamW moment shape mismatch for '" + entry.name + "'");
        auto& theta = entry.value.storage();
        const auto& grad = entry.grad.storage();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = grad[i];
            double th = theta[i];
            th -= o.lr * o.weight_decay * th;
            const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
            const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
            m[i] = static_cast<Real>(mi);
            v[i] = static_cast<Real>(vi);
            th -= o.lr * (mi / bc1) / (std::sqrt(vi / bc2) + o.eps);
            theta[i] = static_cast<Real>(th);
        }
    }
    params.zero_grad();
}

} // namespace diffimpute
