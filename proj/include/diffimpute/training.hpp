#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "diffimpute/core/adamw.hpp"
#include "diffimpute/core/ops.hpp"
#include "diffimpute/denoiser.hpp"
#include "diffimpute/schedule.hpp"

namespace diffimpute {

struct TrainingConfig {
    int epochs = 20;
    std::size_t batch_size = 64;
    int T = 1000;
    ScheduleKind schedule = ScheduleKind::cosine;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double beta_l1 = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw InputError("training: epochs must be >= 1");
        if (batch_size < 2) throw InputError("training: batch_size must be >= 2");
        if (T < 1) throw InputError("training: T must be >= 1");
        if (!(beta_l1 > 0)) throw InputError("training: beta_l1 must be > 0");
        if (!(lr > 0)) throw InputError("training: lr must be > 0");
        if (weight_decay < 0) throw InputError("training: weight_decay must be >= 0");
    }
};

/// What the trainer reports for every optimizer step.
struct TrainingStep {
    int epoch;
    long long step;
    std::span<const int> t;
    double loss;
};

struct TrainingResult {
    std::vector<double> epoch_loss;
    long long steps = 0;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with a per-row step t in [1, T].
template <class Real>
Tensor<Real> q_sample(const DiffusionSchedule& sched, const Tensor<Real>& x0, std::span<const int> t,
                      const Tensor<Real>& eps) {
    require_same_shape(x0, eps, "q_sample");
    if (x0.rank() != 2 || t.size() != x0.dim(0)) throw ShapeError("q_sample: need [B, k] input and B time steps");
    const std::size_t k = x0.dim(1);
    Tensor<Real> out(x0.shape());
    for (std::size_t b = 0; b < t.size(); ++b) {
        if (t[b] < 1) throw InputError("q_sample: time step must be >= 1");
        const double ab = sched.alpha_bar_at(t[b]);
        const Real s0 = static_cast<Real>(std::sqrt(ab)), s1 = static_cast<Real>(std::sqrt(1.0 - ab));
        for (std::size_t j = 0; j < k; ++j) out.at(b, j) = s0 * x0.at(b, j) + s1 * eps.at(b, j);
    }
    return out;
}

/// Fits `model` to predict the noise added to rows of `data` (complete, [N, k]).
///
/// Each epoch reshuffles the rows with the run seed and walks them in
/// mini-batches (the final short batch is kept). Per batch: t ~ U{1..T} per
/// row, eps ~ N(0, I), loss = mean smooth-L1(f(x_t, t), eps), one AdamW step.
template <class Real>
TrainingResult train(Denoiser<Real>& model, const Tensor<Real>& data, const TrainingConfig& cfg,
                     const std::function<void(const TrainingStep&)>& on_step = {}) {
    cfg.validate();
    if (data.rank() != 2 || data.dim(1) != model.config().k)
        throw ShapeError("train: data must be [N, " + std::to_string(model.config().k) + "]");
    const std::size_t n = data.dim(0), k = data.dim(1);
    if (n < cfg.batch_size) throw InputError("train: fewer rows than batch_size");
    data.check_finite("training data");

    const DiffusionSchedule sched = build_schedule(cfg.schedule, cfg.T);
    AdamWState<Real> state(model.params(), AdamWOptions{cfg.lr, cfg.weight_decay});
    model.params().zero_grad();
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_total = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0, bsz = 0; start < n; start += bsz) {
            bsz = std::min(cfg.batch_size, n - start);
            if (n - start - bsz == 1) ++bsz; // never leave a single-row batch (batch norm needs >= 2)
            Tensor<Real> x0(Shape{bsz, k});
            for (std::size_t b = 0; b < bsz; ++b)
                for (std::size_t j = 0; j < k; ++j) x0.at(b, j) = data.at(order[start + b], j);
            std::vector<int> t(bsz);
            for (auto& v : t) v = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.T)));
            Tensor<Real> eps = sample_gaussian<Real>(rng, x0.shape());
            Tensor<Real> xt = q_sample(sched, x0, t, eps);
            std::vector<double> t_model(t.begin(), t.end());

            double loss_value = 0;
            try {
                Graph<Real> g;
                Var<Real> pred = model.forward(g, g.constant(std::move(xt)), t_model, true, &rng);
                Var<Real> loss = ops::smooth_l1_loss(pred, eps, static_cast<Real>(cfg.beta_l1));
                loss_value = static_cast<double>(loss.value()[0]);
                g.backward(loss);
            } catch (const NumericError& e) {
                throw NumericError(std::string("training diverged at step ") + std::to_string(result.steps) +
                                   " (epoch " + std::to_string(epoch) + ", lr " + std::to_string(cfg.lr) +
                                   "): " + e.what());
            }
            adamw_step(model.params(), state);
            for (const auto& e : model.params().entries())
                if (!e.value.all_finite())
                    throw NumericError("training diverged at step " + std::to_string(result.steps) + " (lr " +
                                       std::to_string(cfg.lr) + "): parameter '" + e.name + "' is not finite");
            if (on_step) on_step(TrainingStep{epoch, result.steps, t, loss_value});
            ++result.steps;
            epoch_total += loss_value;
            ++batches;
        }
        result.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
    }
    return result;
}

} // namespace diffimpute
