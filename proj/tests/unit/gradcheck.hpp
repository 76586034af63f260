#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "diffimpute/core/graph.hpp"
#include "diffimpute/core/ops.hpp"
#include "diffimpute/core/rng.hpp"

namespace gradcheck {

using diffimpute::Graph;
using diffimpute::Tensor;
using diffimpute::Var;

/// Below this norm a gradient is treated as structurally zero (e.g. a bias
/// cancelled by a following normalization) and compared absolutely.
inline constexpr double zero_grad_norm = 1e-7;

/// Relative error ||a - n|| / max(||a||, ||n||); absolute ||a - n|| when both
/// norms are below zero_grad_norm.
inline double rel_error(const Tensor<double>& a, const Tensor<double>& n) {
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    if (scale < zero_grad_norm) return std::sqrt(diff);
    return std::sqrt(diff) / scale;
}

/// Reduces any output to a scalar with fixed random weights so every output
/// entry contributes a distinct gradient.
inline Var<double> weighted_sum(Var<double> out, std::uint64_t seed = 99) {
    diffimpute::Rng rng(seed);
    Tensor<double> w = diffimpute::sample_gaussian<double>(rng, out.shape());
    return diffimpute::ops::sum(diffimpute::ops::mul(out, out.graph->constant(std::move(w))));
}

using Builder = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

struct Result {
    std::vector<double> errors; // per input
    double worst() const { return errors.empty() ? 0 : *std::max_element(errors.begin(), errors.end()); }
};

/// Compares backward() gradients of every input against central differences.
/// `f` must return a scalar and be deterministic.
inline Result check(std::vector<Tensor<double>> inputs, const Builder& f, double h = 1e-5) {
    std::vector<Tensor<double>> analytic;
    {
        Graph<double> g;
        std::vector<Var<double>> vars;
        for (const auto& t : inputs) vars.push_back(g.input(t));
        Var<double> loss = f(g, vars);
        g.backward(loss);
        for (const auto& v : vars) analytic.push_back(g.grad(v));
    }
    const auto eval = [&]() {
        Graph<double> g(false);
        std::vector<Var<double>> vars;
        for (const auto& t : inputs) vars.push_back(g.constant(t));
        return f(g, vars).value()[0];
    };
    Result r;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor<double> numeric(inputs[k].shape());
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = inputs[k][i];
            inputs[k][i] = orig + h;
            const double up = eval();
            inputs[k][i] = orig - h;
            const double down = eval();
            inputs[k][i] = orig;
            numeric[i] = (up - down) / (2 * h);
        }
        r.errors.push_back(rel_error(analytic[k], numeric));
    }
    return r;
}

} // namespace gradcheck
