#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diffimpute/core/adamw.hpp"
#include "diffimpute/core/graph.hpp"
#include "diffimpute/core/ops.hpp"
#include "diffimpute/core/param_store.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/metrics.hpp"

namespace diffimpute {

// ---------------------------------------------------------------------------
// ensemble evaluation

/// Produces one imputation of `table`. `mask_seed` identifies the mask being
/// evaluated and `inference` the ensemble member; deterministic imputers
/// ignore both.
using Imputer = std::function<Tensor<double>(const MaskedTable<double>& table, std::uint64_t mask_seed,
                                             std::uint64_t inference)>;

struct EvalRow {
    std::string method;
    std::string setting;
    std::uint64_t mask_seed = 0;
    double mse = 0;
    std::optional<double> pearson;
};

struct EvalOptions {
    int n_mask_seeds = 5;
    int n_inferences = 5;
    std::uint64_t seed = 0; // mask seed s uses seed + s
    /// Called with every averaged imputation (mask spec carries its seed).
    std::function<void(const MaskSpec&, const Mask&, const Tensor<double>&)> on_average;
    /// When set, metrics compare inverse-transformed values (original units).
    std::optional<MinMaxScaler> report_scaler;
};

/// For every setting and mask seed: mask the complete table `x`, average
/// n_inferences imputations, score the average on the missing entries.
inline std::vector<EvalRow> ensemble_eval(const std::string& method, const Imputer& imputer, const Tensor<double>& x,
                                          const std::vector<MaskSpec>& grid, const EvalOptions& opt) {
    if (grid.empty()) throw InputError("ensemble_eval: empty grid");
    if (opt.n_mask_seeds < 1 || opt.n_inferences < 1) throw InputError("ensemble_eval: counts must be >= 1");
    if (x.rank() != 2) throw ShapeError("ensemble_eval: need a 2-D table");
    std::vector<EvalRow> rows;
    for (const MaskSpec& base : grid) {
        for (int s = 0; s < opt.n_mask_seeds; ++s) {
            MaskSpec spec = base;
            spec.seed = opt.seed + static_cast<std::uint64_t>(s);
            MaskedTable<double> table(x, spec.generate(x.dim(0), x.dim(1)));
            Tensor<double> avg;
            for (int r = 0; r < opt.n_inferences; ++r) {
                Tensor<double> run = imputer(table, spec.seed, static_cast<std::uint64_t>(r));
                require_same_shape(run, x, "imputer output");
                if (r == 0) {
                    avg = std::move(run);
                } else {
                    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += run[i];
                }
            }
            if (opt.n_inferences > 1)
                for (auto& v : avg.storage()) v /= static_cast<double>(opt.n_inferences);
            if (opt.on_average) opt.on_average(spec, table.mask, avg);
            if (opt.report_scaler) {
                const Tensor<double> truth = opt.report_scaler->inverse_transform(x);
                const Tensor<double> est = opt.report_scaler->inverse_transform(avg);
                rows.push_back(EvalRow{method, base.label(), spec.seed, mse_missing(truth, est, table.mask),
                                       pearson_missing(truth, est, table.mask)});
            } else {
                rows.push_back(EvalRow{method, base.label(), spec.seed, mse_missing(x, avg, table.mask),
                                       pearson_missing(x, avg, table.mask)});
            }
        }
    }
    return rows;
}

struct SettingSummary {
    std::string method;
    std::string setting;
    double mse_mean = 0;
    double mse_std = 0;
    std::optional<double> pearson_mean;
    int seeds = 0;
};

/// Mean (and population std) of the per-seed MSEs for each (method, setting),
/// in first-appearance order.
inline std::vector<SettingSummary> summarize(const std::vector<EvalRow>& rows) {
    std::vector<SettingSummary> out;
    std::map<std::pair<std::string, std::string>, std::vector<const EvalRow*>> groups;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.method, r.setting);
        if (!groups.count(key)) {
            SettingSummary s;
            s.method = r.method;
            s.setting = r.setting;
            out.push_back(std::move(s));
        }
        groups[key].push_back(&r);
    }
    for (auto& s : out) {
        const auto& g = groups[{s.method, s.setting}];
        double sum = 0, psum = 0;
        bool pearson_ok = true;
        for (const auto* r : g) {
            sum += r->mse;
            if (r->pearson) psum += *r->pearson;
            else pearson_ok = false;
        }
        const double n = static_cast<double>(g.size());
        s.mse_mean = sum / n;
        double var = 0;
        for (const auto* r : g) var += (r->mse - s.mse_mean) * (r->mse - s.mse_mean);
        s.mse_std = std::sqrt(var / n);
        if (pearson_ok) s.pearson_mean = psum / n;
        s.seeds = static_cast<int>(g.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// rank aggregation

struct RankInput {
    std::string setting;
    std::string method;
    double score; // lower is better
};

struct RankRow {
    std::string method;
    double mean = 0;
    double std = 0;
    std::map<std::string, double> ranks; // per setting
};

/// Ranks methods within every setting (1 = best score, ties share the
/// average rank), then reports mean and population std of the ranks per
/// method. Rows come back sorted by mean rank, then by name.
inline std::vector<RankRow> rank_table(const std::vector<RankInput>& input) {
    if (input.empty()) throw InputError("rank_table: no results");
    std::map<std::string, std::map<std::string, double>> by_setting;
    for (const auto& r : input) {
        if (!std::isfinite(r.score))
            throw InputError("rank_table: non-finite score for " + r.method + " / " + r.setting);
        if (!by_setting[r.setting].emplace(r.method, r.score).second)
            throw InputError("rank_table: duplicate result for " + r.method + " / " + r.setting);
    }
    std::set<std::string> methods;
    for (const auto& [m, _] : by_setting.begin()->second) methods.insert(m);
    for (const auto& [setting, scores] : by_setting) {
        std::set<std::string> here;
        for (const auto& [m, _] : scores) here.insert(m);
        if (here != methods) throw InputError("rank_table: setting '" + setting + "' has a different method set");
    }

    std::map<std::string, RankRow> rows;
    for (const auto& m : methods) rows[m].method = m;
    for (const auto& [setting, scores] : by_setting) {
        std::vector<std::pair<double, std::string>> sorted;
        for (const auto& [m, s] : scores) sorted.emplace_back(s, m);
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
            const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
            for (std::size_t q = i; q < j; ++q) rows[sorted[q].second].ranks[setting] = avg;
            i = j;
        }
    }
    std::vector<RankRow> out;
    for (auto& [m, row] : rows) {
        double sum = 0;
        for (const auto& [_, r] : row.ranks) sum += r;
        const double n = static_cast<double>(row.ranks.size());
        row.mean = sum / n;
        double var = 0;
        for (const auto& [_, r] : row.ranks) var += (r - row.mean) * (r - row.mean);
        row.std = std::sqrt(var / n);
        out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end(), [](const RankRow& a, const RankRow& b) {
        return a.mean != b.mean ? a.mean < b.mean : a.method < b.method;
    });
    return out;
}

// ---------------------------------------------------------------------------
// downstream evaluation

struct DownstreamOptions {
    int steps = 500;
    double lr = 0.05;
    double l2 = 1e-3;
};

struct DownstreamResult {
    std::string metric; // "rmse" or "accuracy"
    double value = 0;
};

/// Fits a linear model on (x_train, y_train) with full-batch AdamW and scores
/// it on the test split: ridge regression reporting RMSE for regression,
/// multinomial logistic regression reporting accuracy otherwise.
inline DownstreamResult downstream_eval(const Tensor<double>& x_train, const std::vector<double>& y_train,
                                        const Tensor<double>& x_test, const std::vector<double>& y_test, Task task,
                                        const DownstreamOptions& opt = {}) {
    if (x_train.rank() != 2 || x_test.rank() != 2 || x_train.dim(1) != x_test.dim(1))
        throw ShapeError("downstream_eval: feature shapes disagree");
    if (y_train.size() != x_train.dim(0) || y_test.size() != x_test.dim(0))
        throw ShapeError("downstream_eval: target length mismatch");
    const std::size_t k = x_train.dim(1), n = x_train.dim(0);
    x_train.check_finite("downstream train features");
    x_test.check_finite("downstream test features");

    const bool regression = task == Task::regression;
    std::vector<double> classes;
    double y_mean = 0, y_std = 1;
    if (regression) {
        for (double v : y_train) y_mean += v;
        y_mean /= static_cast<double>(n);
        double var = 0;
        for (double v : y_train) var += (v - y_mean) * (v - y_mean);
        y_std = std::sqrt(var / static_cast<double>(n));
        if (!(y_std > 0)) y_std = 1;
    } else {
        classes = y_train;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        if (classes.size() < 2) throw InputError("downstream_eval: training labels have a single class");
    }
    const std::size_t outputs = regression ? 1 : classes.size();

    ParamStore<double> params;
    params.add("w", Tensor<double>(Shape{k, outputs}));
    params.add("b", Tensor<double>(Shape{outputs}));
    AdamWState<double> state(params, AdamWOptions{opt.lr, 0.0});

    Tensor<double> y_scaled(Shape{n, 1});
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (regression) {
            y_scaled[i] = (y_train[i] - y_mean) / y_std;
        } else {
            labels[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), y_train[i]) -
                                                 classes.begin());
        }
    }
    for (int step = 0; step < opt.steps; ++step) {
        Graph<double> g;
        Var<double> w = g.param(params, "w");
        Var<double> out = ops::linear(g.constant(x_train), w, g.param(params, "b"));
        Var<double> loss = regression ? ops::mse_loss(out, y_scaled) : ops::softmax_cross_entropy(out, labels);
        loss = ops::add(loss, ops::scale(ops::sum(ops::mul(w, w)), opt.l2));
        g.backward(loss);
        adamw_step(params, state);
    }

    Graph<double> g(false);
    const Tensor<double> pred =
        ops::linear(g.constant(x_test), g.constant(params.value("w")), g.constant(params.value("b"))).value();
    std::vector<double> y_hat(x_test.dim(0));
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        if (regression) {
            y_hat[i] = pred[i] * y_std + y_mean;
        } else {
            std::size_t best = 0;
            for (std::size_t c = 1; c < outputs; ++c)
                if (pred[i * outputs + c] > pred[i * outputs + best]) best = c;
            y_hat[i] = classes[best];
        }
    }
    if (regression) return {"rmse", rmse(y_test, y_hat)};
    return {"accuracy", accuracy(y_test, y_hat)};
}

// ---------------------------------------------------------------------------
// reports

/// Plain text table with right-aligned numeric columns.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw InvariantError("TextTable: row width mismatch");
        rows_.push_back(std::move(row));
    }

    void print(std::ostream& out) const {
        std::vector<std::size_t> width(header_.size());
        for (std::size_t c = 0; c < header_.size(); ++c) {
            width[c] = header_[c].size();
            for (const auto& r : rows_) width[c] = std::max(width[c], r[c].size());
        }
        const auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) out << "  ";
                if (c == 0) out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
                else out << std::right << std::setw(static_cast<int>(width[c])) << r[c];
            }
            out << '\n';
        };
        line(header_);
        std::size_t total = 0;
        for (auto w : width) total += w;
        out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        for (const auto& r : rows_) line(r);
    }

    void print_csv(std::ostream& out) const {
        const auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
            out << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

inline void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
    out << "method,setting,mask_seed,mse,pearson\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.setting << ',' << r.mask_seed << ',' << format_real(r.mse) << ','
            << (r.pearson ? format_real(*r.pearson) : std::string("nan")) << '\n';
}

/// Methods x settings grid of mean MSE, settings in first-appearance order.
inline TextTable mse_grid(const std::vector<SettingSummary>& summary) {
    std::vector<std::string> settings, methods;
    std::map<std::pair<std::string, std::string>, double> cell;
    for (const auto& s : summary) {
        if (std::find(settings.begin(), settings.end(), s.setting) == settings.end()) settings.push_back(s.setting);
        if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
        cell[{s.method, s.setting}] = s.mse_mean;
    }
    std::vector<std::string> header{"method"};
    header.insert(header.end(), settings.begin(), settings.end());
    TextTable t(header);
    for (const auto& m : methods) {
        std::vector<std::string> row{m};
        for (const auto& s : settings) {
            auto it = cell.find({m, s});
            row.push_back(it == cell.end() ? "/" : fixed(it->second));
        }
        t.add_row(std::move(row));
    }
    return t;
}

inline TextTable rank_report(const std::vector<RankRow>& ranks) {
    TextTable t({"method", "Mean", "Std"});
    for (const auto& r : ranks) t.add_row({r.method, fixed(r.mean, 2), fixed(r.std, 2)});
    return t;
}

} // namespace diffimpute
