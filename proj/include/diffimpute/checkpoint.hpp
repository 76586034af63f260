#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/param_store.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/denoiser.hpp"
#include "diffimpute/schedule.hpp"

namespace diffimpute {

/// A trained denoiser plus everything needed to impute with it.
template <class Real = double>
struct Checkpoint {
    DenoiserConfig config;
    int T_training = 1000;
    ScheduleKind schedule = ScheduleKind::cosine;
    std::optional<MinMaxScaler> scaler;
    std::vector<std::string> feature_names;
    ParamStore<Real> params;
    ParamStore<Real> buffers;

    static Checkpoint from_model(const Denoiser<Real>& model, int T, ScheduleKind kind,
                                 std::optional<MinMaxScaler> scaler = std::nullopt,
                                 std::vector<std::string> names = {}) {
        Checkpoint c;
        c.config = model.config();
        c.T_training = T;
        c.schedule = kind;
        c.scaler = std::move(scaler);
        c.feature_names = std::move(names);
        c.params = model.params();
        c.buffers = model.buffers();
        return c;
    }

    Denoiser<Real> model() const { return Denoiser<Real>(config, params, buffers); }
};

namespace detail {

inline constexpr char checkpoint_magic[8] = {'D', 'I', 'F', 'F', 'I', 'M', 'P', 'C'};
inline constexpr std::uint32_t checkpoint_version = 1;

class BinWriter {
public:
    explicit BinWriter(std::ostream& out) : out_(out) {}
    template <class T>
    void pod(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint64_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    template <class Real>
    void tensor(const Tensor<Real>& t) {
        pod(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) pod(static_cast<std::uint64_t>(d));
        out_.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(Real)));
    }

private:
    std::ostream& out_;
};

class BinReader {
public:
    BinReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
    template <class T>
    T pod() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in_) fail("truncated file");
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        if (n > (1u << 26)) fail("string length out of range");
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (!in_) fail("truncated file");
        return s;
    }
    template <class Real>
    Tensor<Real> tensor() {
        const auto rank = pod<std::uint32_t>();
        if (rank == 0 || rank > 8) fail("tensor rank out of range");
        Shape shape(rank);
        std::uint64_t total = 1;
        for (auto& d : shape) {
            const auto v = pod<std::uint64_t>();
            if (v == 0 || v > (1ull << 32)) fail("tensor dimension out of range");
            d = static_cast<std::size_t>(v);
            total *= v;
            if (total > (1ull << 32)) fail("tensor too large");
        }
        std::vector<Real> data(static_cast<std::size_t>(total));
        in_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * sizeof(Real)));
        if (!in_) fail("truncated file");
        return Tensor<Real>(std::move(shape), std::move(data));
    }
    [[noreturn]] void fail(const std::string& why) const { throw InputError(source_ + ": bad checkpoint (" + why + ")"); }

private:
    std::istream& in_;
    std::string source_;
};

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(static_cast<std::size_t>(std::stoull(item)));
    return out;
}

} // namespace detail

/// Little-endian binary container: magic, version, value width, the model
/// config, schedule, scaler, feature names, then every parameter and buffer
/// as (name, shape, raw values). Round-trips bit-exactly.
template <class Real>
void write_checkpoint(std::ostream& out, const Checkpoint<Real>& c) {
    detail::BinWriter w(out);
    out.write(detail::checkpoint_magic, sizeof detail::checkpoint_magic);
    w.pod(detail::checkpoint_version);
    w.pod(static_cast<std::uint8_t>(sizeof(Real)));

    const DenoiserConfig& m = c.config;
    w.str(to_string(m.arch));
    for (std::size_t v : {m.k, m.blocks, m.hidden, m.resnet_factor, m.d, m.heads, m.unet_groups})
        w.pod(static_cast<std::uint64_t>(v));
    for (double v : {m.ffn_factor, m.attention_dropout, m.ffn_dropout, m.residual_dropout}) w.pod(v);
    w.str(detail::join_sizes(m.unet_channels));
    w.pod(static_cast<std::uint8_t>(m.time_embedding));

    w.pod(static_cast<std::int32_t>(c.T_training));
    w.str(to_string(c.schedule));

    w.pod(static_cast<std::uint8_t>(c.scaler.has_value()));
    if (c.scaler) {
        w.pod(c.scaler->range_min());
        w.pod(c.scaler->range_max());
        w.pod(static_cast<std::uint64_t>(c.scaler->data_min().size()));
        for (double v : c.scaler->data_min()) w.pod(v);
        for (double v : c.scaler->data_max()) w.pod(v);
    }
    w.pod(static_cast<std::uint64_t>(c.feature_names.size()));
    for (const auto& n : c.feature_names) w.str(n);

    for (const ParamStore<Real>* store : {&c.params, &c.buffers}) {
        w.pod(static_cast<std::uint64_t>(store->size()));
        for (const auto& e : store->entries()) {
            w.str(e.name);
            w.tensor(e.value);
        }
    }
    if (!out) throw InputError("checkpoint write failed");
}

template <class Real>
Checkpoint<Real> read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>") {
    detail::BinReader r(in, source);
    char magic[sizeof detail::checkpoint_magic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::checkpoint_magic, sizeof magic) != 0) r.fail("not a checkpoint file");
    if (r.pod<std::uint32_t>() != detail::checkpoint_version) r.fail("unsupported version");
    if (r.pod<std::uint8_t>() != sizeof(Real)) r.fail("stored value width differs from the requested type");

    Checkpoint<Real> c;
    DenoiserConfig& m = c.config;
    m.arch = parse_architecture(r.str());
    for (std::size_t* v : {&m.k, &m.blocks, &m.hidden, &m.resnet_factor, &m.d, &m.heads, &m.unet_groups})
        *v = static_cast<std::size_t>(r.pod<std::uint64_t>());
    for (double* v : {&m.ffn_factor, &m.attention_dropout, &m.ffn_dropout, &m.residual_dropout}) *v = r.pod<double>();
    m.unet_channels = detail::split_sizes(r.str());
    m.time_embedding = r.pod<std::uint8_t>() != 0;
    m.validate();

    c.T_training = r.pod<std::int32_t>();
    if (c.T_training < 1) r.fail("training length must be >= 1");
    c.schedule = parse_schedule_kind(r.str());

    if (r.pod<std::uint8_t>()) {
        const double lo = r.pod<double>(), hi = r.pod<double>();
        const auto k = r.pod<std::uint64_t>();
        if (k != m.k) r.fail("scaler width does not match the model");
        std::vector<double> mn(k), mx(k);
        for (auto& v : mn) v = r.pod<double>();
        for (auto& v : mx) v = r.pod<double>();
        c.scaler = MinMaxScaler(std::move(mn), std::move(mx), lo, hi);
    }
    const auto names = r.pod<std::uint64_t>();
    if (names != 0 && names != m.k) r.fail("feature name count does not match the model");
    for (std::uint64_t i = 0; i < names; ++i) c.feature_names.push_back(r.str());

    for (ParamStore<Real>* store : {&c.params, &c.buffers}) {
        const auto count = r.pod<std::uint64_t>();
        if (count > 100000) r.fail("parameter count out of range");
        for (std::uint64_t i = 0; i < count; ++i) {
            std::string name = r.str();
            store->add(name, r.template tensor<Real>());
        }
    }
    // fail early on a config / tensor mismatch
    (void)c.model();
    return c;
}

template <class Real>
void save_checkpoint(const std::string& path, const Checkpoint<Real>& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_checkpoint(out, c);
}

template <class Real = double>
Checkpoint<Real> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path + "'");
    return read_checkpoint<Real>(in, path);
}

} // namespace diffimpute
