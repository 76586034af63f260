#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/tensor.hpp"
#include "diffimpute/data.hpp"

namespace diffimpute {

enum class BaselineKind { mean, median, mode, const0, const1, locf, nocb };

inline const std::vector<BaselineKind>& all_baselines() {
    static const std::vector<BaselineKind> kinds{BaselineKind::mean,   BaselineKind::median, BaselineKind::mode,
                                                 BaselineKind::const0, BaselineKind::const1, BaselineKind::locf,
                                                 BaselineKind::nocb};
    return kinds;
}

inline std::string to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::mean: return "mean";
    case BaselineKind::median: return "median";
    case BaselineKind::mode: return "mode";
    case BaselineKind::const0: return "const0";
    case BaselineKind::const1: return "const1";
    case BaselineKind::locf: return "locf";
    case BaselineKind::nocb: return "nocb";
    }
    return "?";
}

inline BaselineKind parse_baseline(const std::string& s) {
    for (auto k : all_baselines())
        if (to_string(k) == s) return k;
    throw InputError("unknown baseline '" + s + "'");
}

namespace detail {

inline std::vector<double> column(const Tensor<double>& x, std::size_t j) {
    std::vector<double> c(x.dim(0));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = x.at(i, j);
    return c;
}

inline double column_mean(const std::vector<double>& c) {
    double s = 0;
    for (double v : c) s += v;
    return s / static_cast<double>(c.size());
}

inline double column_median(std::vector<double> c) {
    std::sort(c.begin(), c.end());
    const std::size_t n = c.size();
    return n % 2 ? c[n / 2] : 0.5 * (c[n / 2 - 1] + c[n / 2]);
}

/// Most frequent exact value; ties go to the smallest.
inline double column_mode(std::vector<double> c) {
    std::sort(c.begin(), c.end());
    double best = c[0];
    std::size_t best_run = 0;
    for (std::size_t i = 0; i < c.size();) {
        std::size_t j = i;
        while (j < c.size() && c[j] == c[i]) ++j;
        if (j - i > best_run) {
            best_run = j - i;
            best = c[i];
        }
        i = j;
    }
    return best;
}

} // namespace detail

/// Fills the missing entries (mask 0) of `x_obs` column by column. Column
/// statistics come from `train_context` only; known entries are copied.
///
/// locf fills from the nearest known entry above, nocb from the nearest known
/// entry below; both use the context column mean when there is none. nocb
/// fails on a column with no known entry at all (whole-column masks).
inline Tensor<double> baseline_impute(BaselineKind kind, const Tensor<double>& x_obs, const Mask& m,
                                      const Tensor<double>& train_context) {
    if (x_obs.rank() != 2 || x_obs.dim(0) != m.rows || x_obs.dim(1) != m.cols)
        throw ShapeError("baseline_impute: x_obs and mask disagree");
    const std::size_t n = x_obs.dim(0), k = x_obs.dim(1);
    if (train_context.rank() != 2 || train_context.dim(1) != k)
        throw ShapeError("baseline_impute: context must have " + std::to_string(k) + " columns");

    Tensor<double> out = x_obs;
    for (std::size_t j = 0; j < k; ++j) {
        double fill = 0;
        switch (kind) {
        case BaselineKind::mean: fill = detail::column_mean(detail::column(train_context, j)); break;
        case BaselineKind::median: fill = detail::column_median(detail::column(train_context, j)); break;
        case BaselineKind::mode: fill = detail::column_mode(detail::column(train_context, j)); break;
        case BaselineKind::const0: fill = 0.0; break;
        case BaselineKind::const1: fill = 1.0; break;
        case BaselineKind::locf: {
            const double fallback = detail::column_mean(detail::column(train_context, j));
            bool have = false;
            double last = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (m.at(i, j)) {
                    last = x_obs.at(i, j);
                    have = true;
                } else {
                    out.at(i, j) = have ? last : fallback;
                }
            }
            continue;
        }
        case BaselineKind::nocb: {
            bool any = false;
            for (std::size_t i = 0; i < n && !any; ++i) any = m.at(i, j);
            if (!any) throw InputError("nocb: column " + std::to_string(j) + " has no observed value to carry back");
            const double fallback = detail::column_mean(detail::column(train_context, j));
            bool have = false;
            double next = 0;
            for (std::size_t i = n; i-- > 0;) {
                if (m.at(i, j)) {
                    next = x_obs.at(i, j);
                    have = true;
                } else {
                    out.at(i, j) = have ? next : fallback;
                }
            }
            continue;
        }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!m.at(i, j)) out.at(i, j) = fill;
    }
    return out;
}

} // namespace diffimpute
