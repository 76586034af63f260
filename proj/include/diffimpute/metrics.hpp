#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/tensor.hpp"
#include "diffimpute/data.hpp"

namespace diffimpute {

namespace detail {

inline void check_metric_inputs(const Tensor<double>& x, const Tensor<double>& x_hat, const Mask& m,
                                const char* what) {
    require_same_shape(x, x_hat, what);
    if (x.rank() != 2 || x.dim(0) != m.rows || x.dim(1) != m.cols)
        throw ShapeError(std::string(what) + ": mask shape does not match");
}

} // namespace detail

/// Mean squared error over the missing entries (mask 0).
inline double mse_missing(const Tensor<double>& x, const Tensor<double>& x_hat, const Mask& m) {
    detail::check_metric_inputs(x, x_hat, m, "mse_missing");
    double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m.known[i]) continue;
        const double d = x[i] - x_hat[i];
        total += d * d;
        ++count;
    }
    if (count == 0) throw InputError("mse_missing: no missing entries");
    return total / static_cast<double>(count);
}

/// Pearson correlation over the missing entries; empty when either side has
/// zero variance.
inline std::optional<double> pearson_missing(const Tensor<double>& x, const Tensor<double>& x_hat, const Mask& m) {
    detail::check_metric_inputs(x, x_hat, m, "pearson_missing");
    std::vector<double> a, b;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!m.known[i]) {
            a.push_back(x[i]);
            b.push_back(x_hat[i]);
        }
    if (a.size() < 2) throw InputError("pearson_missing: need at least 2 missing entries");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0 || sbb <= 0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.empty()) throw InputError("rmse: empty input");
    if (y.size() != y_hat.size()) throw ShapeError("rmse: length mismatch");
    double total = 0;
    for (std::size_t i = 0; i < y.size(); ++i) total += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return std::sqrt(total / static_cast<double>(y.size()));
}

inline double accuracy(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.empty()) throw InputError("accuracy: empty input");
    if (y.size() != y_hat.size()) throw ShapeError("accuracy: length mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == y_hat[i];
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

} // namespace diffimpute
