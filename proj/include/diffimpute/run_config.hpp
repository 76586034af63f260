#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/nn/denoiser_config.hpp"
#include "diffimpute/sampling.hpp"
#include "diffimpute/schedule.hpp"
#include "diffimpute/training.hpp"

#ifndef DIFFIMPUTE_VERSION
#define DIFFIMPUTE_VERSION "0.1.0"
#endif

namespace diffimpute {

inline constexpr const char* version = DIFFIMPUTE_VERSION;

/// Every setting a command can take. Commands read the parts they need; the
/// whole structure is what gets written next to outputs.
struct RunConfig {
    std::uint64_t seed = 0;

    // [data]
    std::string data;
    std::string target;
    std::string task = "auto";
    double train_fraction = 0.8;

    // [model]
    DenoiserConfig model;

    // [training]
    TrainingConfig training;

    // [sampler]
    SamplerOptions sampler;

    // [mask]
    std::string mask_file;
    std::optional<double> mcar;
    std::optional<int> mar;

    // [benchmark]
    std::string methods = "mean,median,mode,const0,const1,locf,nocb";
    std::string grid = "mcar=10..90 mar=1..4";
    std::string presets = "tau-sweep";
    int jobs = 1;
    bool original_scale = false;

    // [io]
    std::string checkpoint;
    std::string out;
    std::string out_dir;
};

namespace detail {

inline std::string fmt_double(double v) { return format_real(v); }

inline double to_double(const std::string& key, const std::string& v) {
    auto d = parse_number(trim(v));
    if (!d) throw InputError("config '" + key + "': expected a number, got '" + v + "'");
    return *d;
}

inline long long to_int(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    long long out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("config '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("config '" + key + "': expected a non-negative integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InputError("config '" + key + "': expected true/false, got '" + v + "'");
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < 0) throw InputError("config '" + key + "': must be >= 0");
    return static_cast<std::size_t>(x);
}

} // namespace detail

/// One configurable setting: "section.key", its CLI flag, and accessors.
struct ConfigField {
    std::string section;
    std::string key;
    std::string flag;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;

    std::string qualified() const { return section + "." + key; }
};

inline const std::vector<ConfigField>& config_fields() {
    using detail::fmt_double;
    using detail::to_double;
    using detail::to_int;
    using detail::to_size;
    using detail::to_u64;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        auto add = [&](std::string section, std::string key, std::string flag, std::string help,
                       std::function<std::string(const RunConfig&)> get,
                       std::function<void(RunConfig&, const std::string&)> set) {
            f.push_back({std::move(section), std::move(key), std::move(flag), std::move(help), std::move(get),
                         std::move(set)});
        };
        const auto str_field = [&](std::string section, std::string key, std::string flag, std::string help,
                                   std::string RunConfig::*member) {
            add(std::move(section), std::move(key), std::move(flag), std::move(help),
                [member](const RunConfig& c) { return c.*member; },
                [member](RunConfig& c, const std::string& v) { c.*member = detail::trim(v); });
        };

        add("run", "seed", "--seed", "random seed for every stochastic step",
            [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) {
                c.seed = to_u64("seed", v);
                c.training.seed = c.seed;
                c.sampler.seed = c.seed;
            });

        str_field("data", "path", "--data", "input CSV", &RunConfig::data);
        str_field("data", "target", "--target", "target column name (excluded from features)", &RunConfig::target);
        add("data", "task", "--task", "auto, regression, binclass or multiclass",
            [](const RunConfig& c) { return c.task; },
            [](RunConfig& c, const std::string& v) {
                const std::string s = detail::trim(v);
                if (s != "auto") (void)parse_task(s);
                c.task = s;
            });
        add("data", "train_fraction", "--train-fraction", "train share of the split (1 = use every row)",
            [](const RunConfig& c) { return fmt_double(c.train_fraction); },
            [](RunConfig& c, const std::string& v) {
                c.train_fraction = to_double("train_fraction", v);
                if (!(c.train_fraction > 0 && c.train_fraction <= 1))
                    throw InputError("config 'train_fraction': must be in (0, 1]");
            });

        add("model", "arch", "--arch", "mlp, resnet, transformer or unet",
            [](const RunConfig& c) { return to_string(c.model.arch); },
            [](RunConfig& c, const std::string& v) { c.model.arch = parse_architecture(detail::trim(v)); });
        const auto size_field = [&](std::string key, std::string flag, std::string help,
                                    std::size_t DenoiserConfig::*member) {
            add("model", key, std::move(flag), std::move(help),
                [member](const RunConfig& c) { return std::to_string(c.model.*member); },
                [member, key](RunConfig& c, const std::string& v) { c.model.*member = to_size(key, v); });
        };
        size_field("blocks", "--blocks", "number of blocks / layers", &DenoiserConfig::blocks);
        size_field("hidden", "--hidden", "MLP/ResNet width", &DenoiserConfig::hidden);
        size_field("resnet_factor", "--resnet-factor", "ResNet inner expansion", &DenoiserConfig::resnet_factor);
        size_field("d", "--d-model", "transformer token width", &DenoiserConfig::d);
        size_field("heads", "--heads", "attention heads", &DenoiserConfig::heads);
        size_field("unet_groups", "--unet-groups", "group-norm groups (U-Net)", &DenoiserConfig::unet_groups);
        const auto rate_field = [&](std::string key, std::string flag, std::string help, double DenoiserConfig::*member) {
            add("model", key, std::move(flag), std::move(help),
                [member](const RunConfig& c) { return fmt_double(c.model.*member); },
                [member, key](RunConfig& c, const std::string& v) { c.model.*member = to_double(key, v); });
        };
        rate_field("ffn_factor", "--ffn-factor", "transformer FFN width factor", &DenoiserConfig::ffn_factor);
        rate_field("attention_dropout", "--attention-dropout", "", &DenoiserConfig::attention_dropout);
        rate_field("ffn_dropout", "--ffn-dropout", "", &DenoiserConfig::ffn_dropout);
        rate_field("residual_dropout", "--residual-dropout", "", &DenoiserConfig::residual_dropout);
        add("model", "unet_channels", "--unet-channels", "encoder channel ramp, comma separated",
            [](const RunConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.model.unet_channels.size(); ++i)
                    s += (i ? "," : "") + std::to_string(c.model.unet_channels[i]);
                return s;
            },
            [](RunConfig& c, const std::string& v) {
                std::vector<std::size_t> ch;
                std::stringstream in(v);
                std::string item;
                while (std::getline(in, item, ',')) ch.push_back(to_size("unet_channels", item));
                if (ch.empty()) throw InputError("config 'unet_channels': empty list");
                c.model.unet_channels = std::move(ch);
            });
        add("model", "time_embedding", "--time-embedding", "use the time-step tokenizer (false = no-tst)",
            [](const RunConfig& c) { return std::string(c.model.time_embedding ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.model.time_embedding = detail::to_bool("time_embedding", v); });

        add("training", "epochs", "--epochs", "training epochs",
            [](const RunConfig& c) { return std::to_string(c.training.epochs); },
            [](RunConfig& c, const std::string& v) { c.training.epochs = static_cast<int>(to_int("epochs", v)); });
        add("training", "batch_size", "--batch-size", "mini-batch size",
            [](const RunConfig& c) { return std::to_string(c.training.batch_size); },
            [](RunConfig& c, const std::string& v) { c.training.batch_size = to_size("batch_size", v); });
        add("training", "T", "--T", "diffusion steps used in training",
            [](const RunConfig& c) { return std::to_string(c.training.T); },
            [](RunConfig& c, const std::string& v) { c.training.T = static_cast<int>(to_int("T", v)); });
        add("training", "schedule", "--schedule", "cosine or linear",
            [](const RunConfig& c) { return to_string(c.training.schedule); },
            [](RunConfig& c, const std::string& v) { c.training.schedule = parse_schedule_kind(detail::trim(v)); });
        add("training", "lr", "--lr", "AdamW learning rate",
            [](const RunConfig& c) { return fmt_double(c.training.lr); },
            [](RunConfig& c, const std::string& v) { c.training.lr = to_double("lr", v); });
        add("training", "weight_decay", "--weight-decay", "AdamW weight decay",
            [](const RunConfig& c) { return fmt_double(c.training.weight_decay); },
            [](RunConfig& c, const std::string& v) { c.training.weight_decay = to_double("weight_decay", v); });

        add("sampler", "T_sampling", "--T-sampling", "diffusion steps used in sampling",
            [](const RunConfig& c) { return std::to_string(c.sampler.T_sampling); },
            [](RunConfig& c, const std::string& v) {
                c.sampler.T_sampling = static_cast<int>(to_int("T_sampling", v));
            });
        add("sampler", "tau", "--tau", "DDIM subset length, or none for the dense sampler",
            [](const RunConfig& c) { return c.sampler.tau ? std::to_string(*c.sampler.tau) : std::string("none"); },
            [](RunConfig& c, const std::string& v) {
                if (detail::trim(v) == "none") {
                    c.sampler.tau.reset();
                    return;
                }
                const auto t = to_int("tau", v);
                if (t < 1) throw InputError("config 'tau': must be >= 1 (or none), got " + detail::trim(v));
                c.sampler.tau = static_cast<int>(t);
            });
        add("sampler", "skip_type", "--skip-type", "uniform or quad",
            [](const RunConfig& c) { return to_string(c.sampler.skip_type); },
            [](RunConfig& c, const std::string& v) { c.sampler.skip_type = parse_skip_type(detail::trim(v)); });
        add("sampler", "eta", "--eta", "DDIM stochasticity",
            [](const RunConfig& c) { return fmt_double(c.sampler.eta); },
            [](RunConfig& c, const std::string& v) { c.sampler.eta = to_double("eta", v); });
        add("sampler", "jump_length", "--jump-length", "harmonization jump length",
            [](const RunConfig& c) { return std::to_string(c.sampler.jump_length); },
            [](RunConfig& c, const std::string& v) {
                c.sampler.jump_length = static_cast<int>(to_int("jump_length", v));
            });
        add("sampler", "jump_n_sample", "--jump-n-sample", "harmonization repeats (j)",
            [](const RunConfig& c) { return std::to_string(c.sampler.jump_n_sample); },
            [](RunConfig& c, const std::string& v) {
                c.sampler.jump_n_sample = static_cast<int>(to_int("jump_n_sample", v));
            });
        add("sampler", "n_inferences", "--n-inferences", "imputations averaged per mask",
            [](const RunConfig& c) { return std::to_string(c.sampler.n_inferences); },
            [](RunConfig& c, const std::string& v) {
                c.sampler.n_inferences = static_cast<int>(to_int("n_inferences", v));
            });
        add("sampler", "n_mask_seeds", "--n-mask-seeds", "masks per benchmark setting",
            [](const RunConfig& c) { return std::to_string(c.sampler.n_mask_seeds); },
            [](RunConfig& c, const std::string& v) {
                c.sampler.n_mask_seeds = static_cast<int>(to_int("n_mask_seeds", v));
            });
        add("sampler", "stepper", "--stepper", "auto, ddpm or ddim",
            [](const RunConfig& c) { return to_string(c.sampler.stepper); },
            [](RunConfig& c, const std::string& v) { c.sampler.stepper = parse_stepper(detail::trim(v)); });

        str_field("mask", "file", "--mask", "0/1 mask CSV (1 = known)", &RunConfig::mask_file);
        add("mask", "mcar", "--mcar", "MCAR missing probability",
            [](const RunConfig& c) { return c.mcar ? fmt_double(*c.mcar) : std::string("none"); },
            [](RunConfig& c, const std::string& v) {
                if (detail::trim(v) == "none") c.mcar.reset();
                else c.mcar = to_double("mcar", v);
            });
        add("mask", "mar", "--mar", "number of fully missing columns",
            [](const RunConfig& c) { return c.mar ? std::to_string(*c.mar) : std::string("none"); },
            [](RunConfig& c, const std::string& v) {
                if (detail::trim(v) == "none") c.mar.reset();
                else c.mar = static_cast<int>(to_int("mar", v));
            });

        str_field("benchmark", "methods", "--methods", "comma-separated methods", &RunConfig::methods);
        str_field("benchmark", "grid", "--grid", "mask grid, e.g. \"mcar=10..90 mar=1..4\"", &RunConfig::grid);
        str_field("benchmark", "presets", "--presets", "ablation presets: no-tst, j=N, tau-sweep",
                  &RunConfig::presets);
        add("benchmark", "jobs", "--jobs", "worker threads",
            [](const RunConfig& c) { return std::to_string(c.jobs); },
            [](RunConfig& c, const std::string& v) {
                c.jobs = static_cast<int>(to_int("jobs", v));
                if (c.jobs < 1) throw InputError("config 'jobs': must be >= 1");
            });

        add("benchmark", "original_scale", "--original-scale", "report metrics in original units (default: scaled)",
            [](const RunConfig& c) { return std::string(c.original_scale ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.original_scale = detail::to_bool("original_scale", v); });

        str_field("io", "checkpoint", "--checkpoint", "checkpoint path", &RunConfig::checkpoint);
        str_field("io", "out", "--out", "output path", &RunConfig::out);
        str_field("io", "out_dir", "--out-dir", "output directory", &RunConfig::out_dir);
        return f;
    }();
    return fields;
}

inline const ConfigField& find_config_field(const std::string& qualified) {
    for (const auto& f : config_fields())
        if (f.qualified() == qualified) return f;
    throw InputError("unknown config key '" + qualified + "'");
}

/// Applies "key = value" lines grouped under "[section]" headers. '#' and ';'
/// start comments. Unknown sections or keys are errors.
inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source = "<config>") {
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(where + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (section.empty()) throw InputError(where + ": key '" + key + "' outside a [section]");
        try {
            find_config_field(section + "." + key).set(cfg, line.substr(eq + 1));
        } catch (const InputError& e) {
            throw InputError(where + ": " + e.what());
        }
    }
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    apply_config_text(cfg, in, path);
}

/// Resolved configuration in the same format apply_config_text reads.
inline std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : config_fields()) {
        if (f.section != section) {
            if (!section.empty()) out << '\n';
            section = f.section;
            out << '[' << section << "]\n";
        }
        out << f.key << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_text(cfg))));
    return buf;
}

/// Header lines for output files (without the leading "# ").
inline std::vector<std::string> provenance(const RunConfig& cfg, const std::string& command) {
    return {"diffimpute " + std::string(version) + " " + command, "seed " + std::to_string(cfg.seed),
            "config " + config_hash(cfg)};
}

/// Parses a benchmark grid such as "mcar=10..90 mar=1..4", "mcar=0.3" or
/// "mcar=10,30,50". MCAR values above 1 are percentages; ranges step by 10
/// for MCAR and by 1 for MAR.
inline std::vector<MaskSpec> parse_grid(const std::string& text) {
    std::vector<MaskSpec> out;
    std::stringstream in(text);
    std::string item;
    while (in >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("grid item '" + item + "': expected mech=values");
        const std::string mech = item.substr(0, eq), values = item.substr(eq + 1);
        if (mech != "mcar" && mech != "mar") throw InputError("grid item '" + item + "': unknown mechanism");
        std::vector<double> list;
        if (auto dots = values.find(".."); dots != std::string::npos) {
            const double lo = detail::to_double("grid", values.substr(0, dots));
            const double hi = detail::to_double("grid", values.substr(dots + 2));
            const double step = mech == "mcar" ? 10.0 : 1.0;
            if (hi < lo) throw InputError("grid item '" + item + "': empty range");
            for (double v = lo; v <= hi + 1e-9; v += step) list.push_back(v);
        } else {
            std::stringstream vs(values);
            std::string v;
            while (std::getline(vs, v, ',')) list.push_back(detail::to_double("grid", v));
        }
        if (list.empty()) throw InputError("grid item '" + item + "': no values");
        for (double v : list) {
            if (mech == "mcar") {
                const double p = v > 1.0 ? v / 100.0 : v;
                if (!(p > 0 && p < 1)) throw InputError("grid item '" + item + "': MCAR rate outside (0, 1)");
                out.push_back(MaskSpec::mcar(p));
            } else {
                if (v != static_cast<int>(v) || v < 1) throw InputError("grid item '" + item + "': bad column count");
                out.push_back(MaskSpec::mar(static_cast<int>(v)));
            }
        }
    }
    if (out.empty()) throw InputError("empty mask grid");
    return out;
}

} // namespace diffimpute
