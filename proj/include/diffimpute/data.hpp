#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/rng.hpp"
#include "diffimpute/core/tensor.hpp"

namespace diffimpute {

enum class Task { regression, binclass, multiclass };

inline std::string to_string(Task t) {
    switch (t) {
    case Task::regression: return "regression";
    case Task::binclass: return "binclass";
    case Task::multiclass: return "multiclass";
    }
    return "?";
}

inline Task parse_task(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "binclass") return Task::binclass;
    if (s == "multiclass") return Task::multiclass;
    throw InputError("unknown task '" + s + "'");
}

/// Boolean N x k mask, 1 = known.
struct Mask {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> known;

    Mask() = default;
    Mask(std::size_t n, std::size_t k, bool value = true) : rows(n), cols(k), known(n * k, value ? 1 : 0) {}

    bool at(std::size_t i, std::size_t j) const { return known[i * cols + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) { known[i * cols + j] = v ? 1 : 0; }
    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count(known.begin(), known.end(), std::uint8_t{0}));
    }
    bool operator==(const Mask&) const = default;
};

struct Dataset {
    Tensor<double> features;
    std::vector<std::string> feature_names;
    std::vector<double> target;
    std::string target_name;
    Task task = Task::regression;

    std::size_t rows() const { return features.dim(0); }
    std::size_t cols() const { return features.dim(1); }
    bool has_target() const { return !target_name.empty(); }
};

struct CsvOptions {
    std::string target;          // column name; empty = no target column
    std::optional<Task> task;    // inferred from the target when unset
    bool allow_missing = false;  // empty / NA / nan cells become missing
};

struct CsvTable {
    Dataset data;
    Mask present; // all ones unless allow_missing found gaps
};

namespace detail {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(trim(cell));
    return out;
}

inline bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "?";
}

inline std::optional<double> parse_number(const std::string& s) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline Task infer_task(const std::vector<double>& y) {
    std::set<double> distinct;
    for (double v : y) {
        if (v != std::floor(v)) return Task::regression;
        distinct.insert(v);
        if (distinct.size() > 20) return Task::regression;
    }
    return distinct.size() <= 2 ? Task::binclass : Task::multiclass;
}

} // namespace detail

/// Shortest "%.Ng" rendering that reads back as the same double.
inline std::string format_real(double v) {
    char buf[32];
    for (int digits = 15; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (digits == 17 || std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// Parses CSV text: a header row, then one numeric row per record. Lines
/// starting with '#' and blank lines are skipped. `source` names the input in
/// error messages.
inline CsvTable parse_csv(std::istream& in, const CsvOptions& opt, const std::string& source = "<csv>") {
    std::string line;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty() || line[0] == '#') continue;
        header = detail::split_csv_line(line);
        break;
    }
    if (header.empty()) throw InputError(source + ": empty file (no header row)");

    std::optional<std::size_t> target_col;
    if (!opt.target.empty()) {
        auto it = std::find(header.begin(), header.end(), opt.target);
        if (it == header.end()) throw InputError(source + ": target column '" + opt.target + "' not in header");
        target_col = static_cast<std::size_t>(it - header.begin());
    }
    const std::size_t k = header.size() - (target_col ? 1 : 0);
    if (k == 0) throw InputError(source + ": no feature columns");

    std::vector<double> values;
    std::vector<std::uint8_t> present;
    std::vector<double> target;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty() || line[0] == '#') continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " cells, found " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const bool is_target = target_col && c == *target_col;
            const auto where = [&] {
                return source + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) + " ('" +
                       header[c] + "')";
            };
            if (opt.allow_missing && !is_target && detail::is_missing_token(cells[c])) {
                values.push_back(0.0);
                present.push_back(0);
                continue;
            }
            auto v = detail::parse_number(cells[c]);
            if (!v) throw InputError(where() + ": cannot parse '" + cells[c] + "' as a number");
            if (is_target) {
                target.push_back(*v);
            } else {
                values.push_back(*v);
                present.push_back(1);
            }
        }
        ++rows;
    }
    if (rows == 0) throw InputError(source + ": no data rows");

    CsvTable out;
    out.data.features = Tensor<double>(Shape{rows, k}, std::move(values));
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!target_col || c != *target_col) out.data.feature_names.push_back(header[c]);
    if (target_col) {
        out.data.target = std::move(target);
        out.data.target_name = header[*target_col];
        out.data.task = opt.task ? *opt.task : detail::infer_task(out.data.target);
    }
    out.present = Mask(rows, k);
    out.present.known = std::move(present);
    return out;
}

inline CsvTable read_csv_table(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return parse_csv(in, opt, path);
}

/// Loads a complete dataset; any unparseable or empty cell is an error.
inline Dataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
    CsvOptions strict = opt;
    strict.allow_missing = false;
    return read_csv_table(path, strict).data;
}

/// Writes `x` under `names` (plus an optional target column). `comment` lines
/// are emitted first, each prefixed with "# ". Missing entries (mask 0) are
/// written as empty cells when a mask is given.
inline void write_csv(std::ostream& out, const Tensor<double>& x, const std::vector<std::string>& names,
                      const std::vector<std::string>& comment = {}, const Mask* blank = nullptr,
                      const std::vector<double>* target = nullptr, const std::string& target_name = "") {
    if (x.rank() != 2 || names.size() != x.dim(1)) throw ShapeError("write_csv: names do not match columns");
    for (const auto& c : comment) out << "# " << c << '\n';
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    if (target) out << ',' << target_name;
    out << '\n';
    for (std::size_t i = 0; i < x.dim(0); ++i) {
        for (std::size_t j = 0; j < x.dim(1); ++j) {
            if (j) out << ',';
            if (!blank || blank->at(i, j)) out << format_real(x.at(i, j));
        }
        if (target) out << ',' << format_real((*target)[i]);
        out << '\n';
    }
}

inline void save_csv(const std::string& path, const Tensor<double>& x, const std::vector<std::string>& names,
                     const std::vector<std::string>& comment = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_csv(out, x, names, comment);
    if (!out) throw InputError("write failed for '" + path + "'");
}

inline std::vector<std::string> default_column_names(std::size_t k) {
    std::vector<std::string> names(k);
    for (std::size_t j = 0; j < k; ++j) names[j] = "x" + std::to_string(j);
    return names;
}

// ---------------------------------------------------------------------------
// scaling

/// Per-column min-max scaling into [lo, hi]. Constant columns map to lo and
/// invert to their single value.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    explicit MinMaxScaler(double lo, double hi) : lo_(lo), hi_(hi) {
        if (!(hi > lo)) throw InputError("MinMaxScaler: range must satisfy min < max");
    }
    MinMaxScaler(std::vector<double> x_min, std::vector<double> x_max, double lo = 0, double hi = 1)
        : lo_(lo), hi_(hi), min_(std::move(x_min)), max_(std::move(x_max)) {
        if (min_.size() != max_.size()) throw InputError("MinMaxScaler: min/max length mismatch");
        for (std::size_t j = 0; j < min_.size(); ++j)
            if (!(max_[j] >= min_[j])) throw InputError("MinMaxScaler: X_max < X_min in column " + std::to_string(j));
    }

    /// Fits on the entries with `known` set (all entries when null).
    void fit(const Tensor<double>& x, const Mask* known = nullptr) {
        if (x.rank() != 2) throw ShapeError("MinMaxScaler::fit: need a 2-D table");
        const std::size_t n = x.dim(0), k = x.dim(1);
        min_.assign(k, 0.0);
        max_.assign(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            bool seen = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (known && !known->at(i, j)) continue;
                const double v = x.at(i, j);
                if (!seen || v < min_[j]) min_[j] = v;
                if (!seen || v > max_[j]) max_[j] = v;
                seen = true;
            }
            if (!seen) throw InputError("MinMaxScaler::fit: column " + std::to_string(j) + " has no observed values");
        }
    }

    Tensor<double> transform(const Tensor<double>& x) const {
        check(x);
        Tensor<double> out(x.shape());
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < x.dim(1); ++j) {
                const double span = max_[j] - min_[j];
                out.at(i, j) = span > 0 ? (x.at(i, j) - min_[j]) / span * (hi_ - lo_) + lo_ : lo_;
            }
        return out;
    }

    Tensor<double> fit_transform(const Tensor<double>& x) {
        fit(x);
        return transform(x);
    }

    Tensor<double> inverse_transform(const Tensor<double>& x) const {
        check(x);
        Tensor<double> out(x.shape());
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < x.dim(1); ++j) {
                const double span = max_[j] - min_[j];
                out.at(i, j) = span > 0 ? (x.at(i, j) - lo_) / (hi_ - lo_) * span + min_[j] : min_[j];
            }
        return out;
    }

    bool fitted() const { return !min_.empty(); }
    const std::vector<double>& data_min() const { return min_; }
    const std::vector<double>& data_max() const { return max_; }
    double range_min() const { return lo_; }
    double range_max() const { return hi_; }

private:
    void check(const Tensor<double>& x) const {
        if (!fitted()) throw InputError("MinMaxScaler: transform before fit");
        if (x.rank() != 2 || x.dim(1) != min_.size())
            throw ShapeError("MinMaxScaler: expected " + std::to_string(min_.size()) + " columns, got " +
                             shape_str(x.shape()));
    }

    double lo_ = 0, hi_ = 1;
    std::vector<double> min_, max_;
};

// ---------------------------------------------------------------------------
// splits and masks

inline Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.target_name = d.target_name;
    out.task = d.task;
    const std::size_t k = d.cols();
    out.features = Tensor<double>(Shape{rows.size(), k});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < k; ++j) out.features.at(r, j) = d.features.at(rows[r], j);
        if (d.has_target()) out.target.push_back(d.target[rows[r]]);
    }
    return out;
}

/// Seeded shuffle, then the first floor(fraction * N) rows go to train.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double fraction, std::uint64_t seed) {
    const std::size_t n = d.rows();
    if (n < 2) throw InputError("split: need at least 2 rows");
    if (!(fraction > 0 && fraction < 1)) throw InputError("split: fraction must be in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> te(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return {take_rows(d, tr), take_rows(d, te)};
}

/// Each entry independently missing with probability p.
inline Mask gen_mcar_mask(std::size_t n, std::size_t k, double p, std::uint64_t seed) {
    if (!(p > 0 && p < 1)) throw InputError("MCAR probability must be in (0, 1), got " + format_real(p));
    if (n == 0 || k == 0) throw InputError("mask shape must be non-empty");
    Mask m(n, k);
    Rng rng(seed);
    for (auto& v : m.known) v = rng.bernoulli(p) ? 0 : 1;
    return m;
}

/// `p_col` whole columns, chosen uniformly without replacement, are missing.
inline Mask gen_mar_mask(std::size_t n, std::size_t k, int p_col, std::uint64_t seed) {
    if (p_col < 1 || static_cast<std::size_t>(p_col) >= k)
        throw InputError("MAR column count must satisfy 1 <= p_col < k (k = " + std::to_string(k) + "), got " +
                         std::to_string(p_col));
    if (n == 0) throw InputError("mask shape must be non-empty");
    std::vector<std::size_t> cols(k);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(p_col); ++i)
        std::swap(cols[i], cols[i + rng.below(k - i)]);
    Mask m(n, k);
    for (std::size_t c = 0; c < static_cast<std::size_t>(p_col); ++c)
        for (std::size_t i = 0; i < n; ++i) m.set(i, cols[c], false);
    return m;
}

enum class Mechanism { mcar, mar };

struct MaskSpec {
    Mechanism mechanism = Mechanism::mcar;
    double p_random = 0.3; // mcar
    int p_col = 1;         // mar
    std::uint64_t seed = 0;

    static MaskSpec mcar(double p, std::uint64_t seed = 0) { return {Mechanism::mcar, p, 0, seed}; }
    static MaskSpec mar(int cols, std::uint64_t seed = 0) { return {Mechanism::mar, 0.0, cols, seed}; }

    Mask generate(std::size_t n, std::size_t k) const {
        return mechanism == Mechanism::mcar ? gen_mcar_mask(n, k, p_random, seed) : gen_mar_mask(n, k, p_col, seed);
    }

    /// "mcar=0.3" / "mar=2"
    std::string label() const {
        if (mechanism == Mechanism::mar) return "mar=" + std::to_string(p_col);
        char buf[32];
        std::snprintf(buf, sizeof buf, "mcar=%g", p_random);
        return buf;
    }
};

inline void write_mask_csv(std::ostream& out, const Mask& m, const std::vector<std::string>& names) {
    if (names.size() != m.cols) throw ShapeError("write_mask_csv: names do not match columns");
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) out << (j ? "," : "") << (m.at(i, j) ? '1' : '0');
        out << '\n';
    }
}

/// Reads a 0/1 mask CSV with a header row.
inline Mask read_mask_csv(std::istream& in, const std::string& source = "<mask>") {
    CsvTable t = parse_csv(in, {}, source);
    const Tensor<double>& v = t.data.features;
    Mask m(v.dim(0), v.dim(1));
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double x = v.at(i, j);
            if (x != 0.0 && x != 1.0)
                throw InputError(source + ": row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                                 ": mask entries must be 0 or 1");
            m.set(i, j, x == 1.0);
        }
    return m;
}

inline Mask load_mask_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_mask_csv(in, path);
}

/// Observed table for the sampler: x_obs (values at missing entries are
/// ignored), the known mask, and the scaler that produced x_obs if any.
template <class Real = double>
struct MaskedTable {
    Tensor<Real> x_obs;
    Mask mask;
    std::optional<MinMaxScaler> scaler;

    MaskedTable() = default;
    MaskedTable(Tensor<Real> x, Mask m, std::optional<MinMaxScaler> s = std::nullopt)
        : x_obs(std::move(x)), mask(std::move(m)), scaler(std::move(s)) {
        validate();
    }

    void validate() const {
        if (x_obs.rank() != 2 || x_obs.dim(0) != mask.rows || x_obs.dim(1) != mask.cols ||
            mask.known.size() != mask.rows * mask.cols)
            throw ShapeError("MaskedTable: x_obs " + shape_str(x_obs.shape()) + " and mask " +
                             std::to_string(mask.rows) + "x" + std::to_string(mask.cols) + " disagree");
        for (auto v : mask.known)
            if (v > 1) throw InputError("MaskedTable: mask must be 0/1");
    }
};

} // namespace diffimpute
