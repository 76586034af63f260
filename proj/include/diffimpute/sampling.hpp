#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/rng.hpp"
#include "diffimpute/core/tensor.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/denoiser.hpp"
#include "diffimpute/schedule.hpp"

namespace diffimpute {

/// How descending steps update the unknown region. `automatic` uses the
/// ancestral step on a dense plan and the DDIM step when `tau` is set.
enum class Stepper { automatic, ddpm, ddim };

inline std::string to_string(Stepper s) {
    switch (s) {
    case Stepper::automatic: return "auto";
    case Stepper::ddpm: return "ddpm";
    case Stepper::ddim: return "ddim";
    }
    return "?";
}

inline Stepper parse_stepper(const std::string& s) {
    if (s == "auto") return Stepper::automatic;
    if (s == "ddpm") return Stepper::ddpm;
    if (s == "ddim") return Stepper::ddim;
    throw InputError("unknown stepper '" + s + "'");
}

struct SamplerOptions {
    int T_sampling = 500;
    std::optional<int> tau;
    SkipType skip_type = SkipType::uniform;
    double eta = 0.0;
    int jump_length = 1;
    int jump_n_sample = 1;
    int n_mask_seeds = 5;
    int n_inferences = 5;
    std::uint64_t seed = 0;
    Stepper stepper = Stepper::automatic;
    /// Length of the schedule the denoiser was trained on. The model sees
    /// sampler step t as t * T_training / T_sampling. 0 means T_sampling.
    int T_training = 0;

    void validate() const {
        if (T_sampling < 1) throw InputError("sampler: T_sampling must be >= 1");
        if (tau && (*tau < 1 || *tau > T_sampling))
            throw InputError("sampler: tau must satisfy 1 <= tau <= T_sampling (" + std::to_string(T_sampling) +
                             "), got " + std::to_string(*tau));
        if (!(eta >= 0)) throw InputError("sampler: eta must be >= 0");
        if (jump_length < 1 || jump_n_sample < 1) throw InputError("sampler: jump parameters must be >= 1");
        if (n_mask_seeds < 1 || n_inferences < 1) throw InputError("sampler: ensemble counts must be >= 1");
        if (T_training < 0) throw InputError("sampler: T_training must be >= 0");
    }

    /// The 0-based step indices the sampler visits, ending in -1.
    std::vector<int> plan() const {
        validate();
        std::vector<int> seq;
        if (tau) {
            seq = skip_seq(T_sampling, *tau, skip_type);
        } else {
            seq.resize(static_cast<std::size_t>(T_sampling));
            for (int i = 0; i < T_sampling; ++i) seq[static_cast<std::size_t>(i)] = i;
        }
        return harmonization_plan(seq, jump_length, jump_n_sample);
    }
};

// ---------------------------------------------------------------------------
// single-step updates; all steps are 1-based, step 0 is clean data

namespace detail {

inline void require_pair(const char* what, const Shape& a, const Shape& b) {
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace detail

/// sqrt(abar_s) x0 + sqrt(1 - abar_s) eps, the known region at level s.
template <class Real>
Tensor<Real> known_sample_at(const DiffusionSchedule& sched, const Tensor<Real>& x0, int s, const Tensor<Real>& eps) {
    detail::require_pair("known_sample", x0.shape(), eps.shape());
    const double ab = sched.alpha_bar_at(s);
    const Real a = static_cast<Real>(std::sqrt(ab)), b = static_cast<Real>(std::sqrt(1.0 - ab));
    Tensor<Real> out(x0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

/// Known region for step t - 1.
template <class Real>
Tensor<Real> known_sample(const DiffusionSchedule& sched, const Tensor<Real>& x0, int t, const Tensor<Real>& eps) {
    sched.check_step(t, 1);
    return known_sample_at(sched, x0, t - 1, eps);
}

/// Ancestral update
/// (1/sqrt(alpha_t)) (x_t - (1 - alpha_t)/sqrt(1 - abar_t) eps_hat) + sigma_t noise,
/// with the noise term dropped at t = 1.
template <class Real>
Tensor<Real> ddpm_step(const DiffusionSchedule& sched, const Tensor<Real>& x_t, int t, const Tensor<Real>& eps_hat,
                       const Tensor<Real>& noise) {
    detail::require_pair("ddpm_step", x_t.shape(), eps_hat.shape());
    detail::require_pair("ddpm_step", x_t.shape(), noise.shape());
    const double alpha = sched.alpha_at(t), ab = sched.alpha_bar_at(t);
    const double c0 = 1.0 / std::sqrt(alpha);
    const double c1 = (1.0 - alpha) / std::sqrt(1.0 - ab);
    const double sigma = t > 1 ? sched.posterior_sigma_at(t) : 0.0;
    Tensor<Real> out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<Real>(c0 * (x_t[i] - c1 * eps_hat[i]) + sigma * noise[i]);
    return out;
}

/// DDIM update from step t to prev_t < t:
/// sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev - sigma^2) eps_hat + sigma noise.
template <class Real>
Tensor<Real> impute_ddim_step(const DiffusionSchedule& sched, const Tensor<Real>& x_t, int t, int prev_t,
                              const Tensor<Real>& eps_hat, double eta, const Tensor<Real>& noise) {
    detail::require_pair("impute_ddim_step", x_t.shape(), eps_hat.shape());
    detail::require_pair("impute_ddim_step", x_t.shape(), noise.shape());
    const double sigma = ddim_sigma(sched, t, prev_t, eta);
    const double ab_t = sched.alpha_bar_at(t), ab_prev = sched.alpha_bar_at(prev_t);
    double dir = 1.0 - ab_prev - sigma * sigma;
    if (dir < 0) {
        if (dir < -1e-12)
            throw NumericError("impute_ddim_step: 1 - abar_prev - sigma^2 < 0 at t=" + std::to_string(t) +
                               " (eta " + format_real(eta) + " too large)");
        dir = 0;
    }
    const double s_t = std::sqrt(1.0 - ab_t), r_t = std::sqrt(ab_t);
    const double s_prev = std::sqrt(ab_prev), c_dir = std::sqrt(dir);
    Tensor<Real> out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0_hat = (x_t[i] - s_t * eps_hat[i]) / r_t;
        out[i] = static_cast<Real>(s_prev * x0_hat + c_dir * eps_hat[i] + sigma * noise[i]);
    }
    return out;
}

/// m * known + (1 - m) * unknown, entry by entry.
template <class Real>
Tensor<Real> combine(const Tensor<Real>& known, const Tensor<Real>& unknown, const Mask& m) {
    detail::require_pair("combine", known.shape(), unknown.shape());
    if (known.rank() != 2 || known.dim(0) != m.rows || known.dim(1) != m.cols)
        throw ShapeError("combine: mask shape does not match " + shape_str(known.shape()));
    Tensor<Real> out(known.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.known[i] ? known[i] : unknown[i];
    return out;
}

/// One forward diffusion step t - 1 -> t: sqrt(alpha_t) x + sqrt(1 - alpha_t) eps.
template <class Real>
Tensor<Real> harmonize_back(const DiffusionSchedule& sched, const Tensor<Real>& x_prev, int t,
                            const Tensor<Real>& eps) {
    detail::require_pair("harmonize_back", x_prev.shape(), eps.shape());
    const double a = sched.alpha_at(t);
    const Real c0 = static_cast<Real>(std::sqrt(a)), c1 = static_cast<Real>(std::sqrt(1.0 - a));
    Tensor<Real> out(x_prev.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * x_prev[i] + c1 * eps[i];
    return out;
}

/// Forward diffusion from step `from` to `to` > from, using the aggregate
/// retention abar_to / abar_from. Equals harmonize_back when to = from + 1.
template <class Real>
Tensor<Real> harmonize_back_span(const DiffusionSchedule& sched, const Tensor<Real>& x, int from, int to,
                                 const Tensor<Real>& eps) {
    if (!(from >= 0 && to > from)) throw InputError("harmonize_back_span: need 0 <= from < to");
    if (to == from + 1) return harmonize_back(sched, x, to, eps);
    detail::require_pair("harmonize_back_span", x.shape(), eps.shape());
    const double a = sched.alpha_bar_at(to) / sched.alpha_bar_at(from);
    const Real c0 = static_cast<Real>(std::sqrt(a)), c1 = static_cast<Real>(std::sqrt(1.0 - a));
    Tensor<Real> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * x[i] + c1 * eps[i];
    return out;
}

// ---------------------------------------------------------------------------
// full imputation

/// One transition of the sampler, reported after the state has been updated.
template <class Real>
struct SamplerEvent {
    std::size_t index; // position in the plan
    int from;          // 1-based step before the transition
    int to;            // 1-based step after it (0 = clean)
    bool descend;
    const Tensor<Real>& x;
};

template <class Real>
using SamplerObserver = std::function<void(const SamplerEvent<Real>&)>;

/// One imputation run using the stream Rng::derive(opts.seed, inference).
template <class Real>
Tensor<Real> impute_once(const Denoiser<Real>& model, const MaskedTable<Real>& table, const DiffusionSchedule& sched,
                         const SamplerOptions& opts, std::uint64_t inference,
                         const SamplerObserver<Real>& observer = {}) {
    opts.validate();
    table.validate();
    if (sched.T != opts.T_sampling)
        throw InputError("impute: schedule length " + std::to_string(sched.T) + " != T_sampling " +
                         std::to_string(opts.T_sampling));
    const std::size_t n = table.x_obs.dim(0), k = table.x_obs.dim(1);
    if (k != model.config().k)
        throw ShapeError("impute: table has " + std::to_string(k) + " columns, model expects " +
                         std::to_string(model.config().k));
    const Stepper stepper =
        opts.stepper != Stepper::automatic ? opts.stepper : (opts.tau ? Stepper::ddim : Stepper::ddpm);
    const double time_scale =
        opts.T_training > 0 ? static_cast<double>(opts.T_training) / static_cast<double>(opts.T_sampling) : 1.0;

    // missing entries of x_obs are never read
    Tensor<Real> x0(table.x_obs.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = table.mask.known[i] ? table.x_obs[i] : Real(0);
    for (std::size_t i = 0; i < x0.size(); ++i)
        if (table.mask.known[i] && !std::isfinite(static_cast<double>(x0[i])))
            throw InputError("impute: observed entry " + std::to_string(i / k) + "," + std::to_string(i % k) +
                             " is not finite");

    const std::vector<int> plan = opts.plan();
    Rng rng = Rng::derive(opts.seed, inference);
    const Shape shape{n, k};

    const int top = plan.front() + 1;
    Tensor<Real> x;
    {
        Tensor<Real> eps_known = sample_gaussian<Real>(rng, shape);
        Tensor<Real> unknown = sample_gaussian<Real>(rng, shape);
        x = combine(known_sample_at(sched, x0, top, eps_known), unknown, table.mask);
    }

    std::vector<double> t_model(n);
    for (std::size_t p = 0; p + 1 < plan.size(); ++p) {
        const int t = plan[p] + 1, next = plan[p + 1] + 1;
        if (next < t) {
            for (auto& v : t_model) v = static_cast<double>(t) * time_scale;
            const Tensor<Real> eps_hat = model.predict(x, t_model);
            const Tensor<Real> eps_known = sample_gaussian<Real>(rng, shape);
            const Tensor<Real> noise = sample_gaussian<Real>(rng, shape);
            Tensor<Real> unknown;
            if (stepper == Stepper::ddpm) {
                if (next != t - 1)
                    throw InputError("impute: ancestral stepper needs adjacent steps, plan jumps " +
                                     std::to_string(t) + " -> " + std::to_string(next));
                unknown = ddpm_step(sched, x, t, eps_hat, noise);
            } else {
                unknown = impute_ddim_step(sched, x, t, next, eps_hat, opts.eta, noise);
            }
            x = combine(known_sample_at(sched, x0, next, eps_known), unknown, table.mask);
        } else {
            const Tensor<Real> eps = sample_gaussian<Real>(rng, shape);
            x = harmonize_back_span(sched, x, t, next, eps);
        }
        if (!x.all_finite())
            throw NumericError("impute: non-finite state at plan position " + std::to_string(p) + " (step " +
                               std::to_string(t) + " -> " + std::to_string(next) + ")");
        if (observer) observer(SamplerEvent<Real>{p, t, next, next < t, x});
    }
    if (plan[plan.size() - 2] != 0) throw InvariantError("impute: plan does not end at step 1");

    for (std::size_t i = 0; i < x.size(); ++i)
        if (table.mask.known[i]) x[i] = table.x_obs[i];
    return x;
}

/// Mean of opts.n_inferences runs (streams 0..n-1, reduced in index order);
/// known entries equal the observations exactly.
template <class Real>
Tensor<Real> impute(const Denoiser<Real>& model, const MaskedTable<Real>& table, const DiffusionSchedule& sched,
                    const SamplerOptions& opts, const SamplerObserver<Real>& observer = {}) {
    opts.validate();
    Tensor<Real> acc;
    for (int r = 0; r < opts.n_inferences; ++r) {
        Tensor<Real> run = impute_once(model, table, sched, opts, static_cast<std::uint64_t>(r), observer);
        if (r == 0) {
            acc = std::move(run);
        } else {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += run[i];
        }
    }
    const Real inv = Real(1) / static_cast<Real>(opts.n_inferences);
    if (opts.n_inferences > 1)
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] *= inv;
    for (std::size_t i = 0; i < acc.size(); ++i)
        if (table.mask.known[i]) acc[i] = table.x_obs[i];
    return acc;
}

} // namespace diffimpute
