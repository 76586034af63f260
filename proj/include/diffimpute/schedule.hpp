#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"

namespace diffimpute {

/// Precomputed noise schedule for T diffusion steps.
///
/// Time-step convention: steps are numbered t = 1..T. The vectors below are
/// stored 0-based, so `beta[t - 1]` is the value for step t. The accessor
/// functions take the 1-based step; `alpha_bar_at(0)` is defined as 1 so a
/// sample "at step 0" is the clean data.
///
/// Sampling plans (skip_seq, harmonization_plan) work on the stored 0-based
/// indices instead, with -1 standing for step 0.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> posterior_sigma;

    void check_step(int t, int lo) const {
        if (t < lo || t > T)
            throw InputError("time step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                             std::to_string(T) + "]");
    }

    double alpha_bar_at(int t) const {
        check_step(t, 0);
        return t == 0 ? 1.0 : alpha_bar[t - 1];
    }
    double beta_at(int t) const {
        check_step(t, 1);
        return beta[t - 1];
    }
    double alpha_at(int t) const {
        check_step(t, 1);
        return alpha[t - 1];
    }
    double posterior_sigma_at(int t) const {
        check_step(t, 1);
        return posterior_sigma[t - 1];
    }
};

enum class ScheduleKind { cosine, linear };

inline std::string to_string(ScheduleKind k) { return k == ScheduleKind::cosine ? "cosine" : "linear"; }

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "linear") return ScheduleKind::linear;
    throw InputError("unknown schedule '" + s + "'");
}

namespace detail {

/// Fills alpha, alpha_bar and posterior_sigma from beta.
inline DiffusionSchedule finish_schedule(std::vector<double> beta) {
    DiffusionSchedule s;
    s.T = static_cast<int>(beta.size());
    s.beta = std::move(beta);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    s.posterior_sigma.resize(s.beta.size());
    double cum = 1.0;
    for (std::size_t i = 0; i < s.beta.size(); ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        const double prev = cum;
        cum *= s.alpha[i];
        s.alpha_bar[i] = cum;
        // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
        s.posterior_sigma[i] = std::sqrt((1.0 - prev) / (1.0 - cum) * s.beta[i]);
    }
    return s;
}

} // namespace detail

/// Cosine schedule: abar(t) = f(t) / f(0), f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2)
/// with s = 0.008; beta_t = 1 - abar(t)/abar(t-1) clipped to 0.999. The stored
/// alpha_bar is the running product of the (clipped) 1 - beta_t.
inline DiffusionSchedule build_cosine_schedule(int T) {
    if (T < 1) throw InputError("schedule length T must be >= 1");
    constexpr double s = 0.008;
    const auto f = [&](double t) {
        const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
    };
    std::vector<double> beta(T);
    for (int t = 1; t <= T; ++t) beta[t - 1] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    return detail::finish_schedule(std::move(beta));
}

/// Linear beta ramp (1e-4 .. 0.02 at T = 1000, rescaled for other T). Ablation only.
inline DiffusionSchedule build_linear_schedule(int T) {
    if (T < 1) throw InputError("schedule length T must be >= 1");
    const double scale = 1000.0 / T;
    const double lo = scale * 1e-4, hi = std::min(scale * 0.02, 0.999);
    std::vector<double> beta(T);
    for (int i = 0; i < T; ++i) beta[i] = T == 1 ? hi : lo + (hi - lo) * i / (T - 1);
    return detail::finish_schedule(std::move(beta));
}

inline DiffusionSchedule build_schedule(ScheduleKind kind, int T) {
    return kind == ScheduleKind::cosine ? build_cosine_schedule(T) : build_linear_schedule(T);
}

/// DDIM noise scale between steps prev_t < t (1-based, prev_t may be 0):
/// eta * sqrt((1 - abar_prev) / (1 - abar_t)) * sqrt(1 - abar_t / abar_prev).
/// Uses the cumulative abar throughout.
inline double ddim_sigma(const DiffusionSchedule& sched, int t, int prev_t, double eta) {
    if (!(prev_t >= 0 && prev_t < t && t <= sched.T))
        throw InputError("ddim_sigma: need 0 <= prev_t < t <= T, got t=" + std::to_string(t) +
                         " prev_t=" + std::to_string(prev_t));
    if (eta < 0) throw InputError("ddim_sigma: eta must be >= 0");
    if (eta == 0.0) return 0.0;
    const double ab_t = sched.alpha_bar_at(t);
    const double ab_prev = sched.alpha_bar_at(prev_t);
    return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
}

enum class SkipType { uniform, quad };

inline std::string to_string(SkipType k) { return k == SkipType::uniform ? "uniform" : "quad"; }

inline SkipType parse_skip_type(const std::string& s) {
    if (s == "uniform") return SkipType::uniform;
    if (s == "quad") return SkipType::quad;
    throw InputError("unknown skip type '" + s + "'");
}

/// Condensed 0-based index subset of [0, num_timesteps).
///
/// uniform: range(0, num_timesteps, num_timesteps / timesteps), so the length
/// is exactly `timesteps` only when it divides num_timesteps.
/// quad: int(linspace(0, sqrt(0.8 * num_timesteps), timesteps)^2), with
/// repeated leading values collapsed so the result stays strictly ascending.
inline std::vector<int> skip_seq(int num_timesteps, int timesteps, SkipType type) {
    if (timesteps < 1 || timesteps > num_timesteps)
        throw InputError("skip_seq: need 1 <= timesteps <= num_timesteps");
    std::vector<int> seq;
    if (type == SkipType::uniform) {
        const int skip = num_timesteps / timesteps;
        for (int i = 0; i < num_timesteps; i += skip) seq.push_back(i);
        return seq;
    }
    const double stop = std::sqrt(num_timesteps * 0.8);
    if (timesteps == 1) return {0};
    const double step = stop / (timesteps - 1);
    for (int i = 0; i < timesteps; ++i) {
        const double x = i == timesteps - 1 ? stop : i * step;
        const int v = static_cast<int>(x * x);
        if (seq.empty() || v > seq.back()) seq.push_back(v);
    }
    return seq;
}

/// Resampling ("retrace") traversal of `ddim_seq` used by Harmonization.
///
/// Every `jump_n_sample`-th position (from the bottom, while at least
/// `jump_length` positions remain above it) is revisited `jump_n_sample - 1`
/// extra times: after descending to it the walk climbs back `jump_length`
/// positions and descends again. Entries are 0-based indices; -1 terminates.
inline std::vector<int> harmonization_plan(const std::vector<int>& ddim_seq, int jump_length, int jump_n_sample) {
    if (ddim_seq.empty()) throw InputError("harmonization_plan: empty sequence");
    if (jump_length < 1 || jump_n_sample < 1) throw InputError("harmonization_plan: jump parameters must be >= 1");
    std::map<int, int> jumps;
    const int n = static_cast<int>(ddim_seq.size());
    for (int j = 0; j < n - jump_length; j += jump_n_sample) jumps[ddim_seq[j]] = jump_n_sample - 1;

    std::vector<int> ts;
    int t = n;
    while (t >= 1) {
        t -= 1;
        ts.push_back(ddim_seq[t]);
        auto it = jumps.find(ddim_seq[t]);
        if (it != jumps.end() && it->second > 0) {
            it->second -= 1;
            for (int i = 0; i < jump_length; ++i) {
                t += 1;
                ts.push_back(ddim_seq[t]);
            }
        }
    }
    ts.push_back(-1);
    return ts;
}

} // namespace diffimpute
