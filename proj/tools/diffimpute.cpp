// diffimpute command-line tool: train / impute / benchmark / ablate.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diffimpute/diffimpute.hpp"

namespace fs = std::filesystem;
using namespace diffimpute;

namespace {

enum ExitCode { ok = 0, input_error = 2, numeric_error = 3, internal_error = 4 };

void log(const std::string& msg) { std::cerr << "diffimpute: " << msg << '\n'; }

/// Flags of one subcommand, bound to config keys.
struct Bindings {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void bind(CLI::App* app, const std::vector<std::string>& keys) {
        app->add_option("--config", config_path, "key = value config file (flags override it)");
        for (const auto& key : keys) {
            const ConfigField& f = find_config_field(key);
            CLI::Option* opt = app->add_option(f.flag, values[key], f.help);
            options.emplace_back(key, opt);
        }
    }

    RunConfig resolve() {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) find_config_field(key).set(cfg, values[key]);
        return cfg;
    }
};

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    return out;
}

void write_comments(std::ostream& out, const std::vector<std::string>& lines) {
    for (const auto& l : lines) out << "# " << l << '\n';
}

void write_config(const fs::path& path, const RunConfig& cfg, const std::string& command) {
    auto out = open_output(path);
    write_comments(out, provenance(cfg, command));
    out << config_to_text(cfg);
}

void write_table(const fs::path& stem, const TextTable& table, const std::vector<std::string>& comments) {
    {
        auto out = open_output(fs::path(stem).concat(".txt"));
        write_comments(out, comments);
        table.print(out);
    }
    auto out = open_output(fs::path(stem).concat(".csv"));
    write_comments(out, comments);
    table.print_csv(out);
}

CsvOptions csv_options(const RunConfig& cfg, bool allow_missing) {
    CsvOptions o;
    o.target = cfg.target;
    if (cfg.task != "auto") o.task = parse_task(cfg.task);
    o.allow_missing = allow_missing;
    return o;
}

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) throw InputError(flag + " is required");
}

/// Train/test partition used by benchmark and ablate (and the train split of cmd_train).
std::pair<Dataset, Dataset> partition(const Dataset& d, const RunConfig& cfg) {
    if (cfg.train_fraction >= 1.0) return {d, d};
    return split(d, cfg.train_fraction, cfg.seed);
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) { return Rng::derive(seed, stream).next_u64(); }

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    require(cfg.data, "--data");
    const Dataset data = load_csv(cfg.data, csv_options(cfg, false));
    const Dataset train_rows = cfg.train_fraction >= 1.0 ? data : partition(data, cfg).first;

    MinMaxScaler scaler;
    const Tensor<double> x = scaler.fit_transform(train_rows.features);
    cfg.model.k = x.dim(1);
    TrainingConfig tc = cfg.training;
    tc.seed = sub_seed(cfg.seed, 1);

    log("training " + to_string(cfg.model.arch) + " on " + std::to_string(x.dim(0)) + " rows x " +
        std::to_string(x.dim(1)) + " features");
    Denoiser<double> model(cfg.model, sub_seed(cfg.seed, 0));
    const auto t0 = std::chrono::steady_clock::now();
    TrainingResult result = train(model, x, tc, [&](const TrainingStep&) {});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        log("epoch " + std::to_string(e + 1) + " loss " + fixed(result.epoch_loss[e], 6));
    log("trained " + std::to_string(result.steps) + " steps in " + fixed(secs, 1) + " s");

    const fs::path out = cfg.out.empty() ? fs::path("model.ckpt") : fs::path(cfg.out);
    {
        auto f = open_output(out);
        write_checkpoint(f, Checkpoint<double>::from_model(model, tc.T, tc.schedule, scaler, data.feature_names));
        if (!f) throw InputError("write failed for '" + out.string() + "'");
    }
    {
        auto f = open_output(fs::path(out).concat(".loss.csv"));
        write_comments(f, provenance(cfg, "train"));
        f << "epoch,loss\n";
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
            f << e + 1 << ',' << format_real(result.epoch_loss[e]) << '\n';
    }
    write_config(fs::path(out).concat(".config.ini"), cfg, "train");
    log("wrote " + out.string());
    return ok;
}

int cmd_impute(const RunConfig& cfg) {
    require(cfg.checkpoint, "--checkpoint");
    require(cfg.data, "--data");
    const Checkpoint<double> ckpt = load_checkpoint<double>(cfg.checkpoint);
    const CsvTable table = read_csv_table(cfg.data, csv_options(cfg, true));
    const Tensor<double>& x_obs = table.data.features;
    const std::size_t n = x_obs.dim(0), k = x_obs.dim(1);
    if (k != ckpt.config.k)
        throw ShapeError("data has " + std::to_string(k) + " feature columns, checkpoint expects " +
                         std::to_string(ckpt.config.k));

    const int sources = !cfg.mask_file.empty() + cfg.mcar.has_value() + cfg.mar.has_value();
    if (sources > 1) throw InputError("use at most one of --mask, --mcar, --mar");
    Mask mask = table.present;
    std::optional<Mask> extra;
    if (!cfg.mask_file.empty()) extra = load_mask_csv(cfg.mask_file);
    if (cfg.mcar) extra = gen_mcar_mask(n, k, *cfg.mcar, cfg.seed);
    if (cfg.mar) extra = gen_mar_mask(n, k, *cfg.mar, cfg.seed);
    if (extra) {
        if (extra->rows != n || extra->cols != k) throw ShapeError("mask shape does not match the data");
        for (std::size_t i = 0; i < mask.known.size(); ++i) mask.known[i] = mask.known[i] && extra->known[i];
    }
    if (mask.missing_count() == 0) log("no missing entries; output equals input");

    SamplerOptions opts = cfg.sampler;
    opts.seed = cfg.seed;
    opts.T_training = ckpt.T_training;
    opts.validate();
    const DiffusionSchedule sched = build_schedule(ckpt.schedule, opts.T_sampling);
    const Tensor<double> scaled = ckpt.scaler ? ckpt.scaler->transform(x_obs) : x_obs;
    const Denoiser<double> model = ckpt.model();

    std::size_t evaluations = 0;
    const auto t0 = std::chrono::steady_clock::now();
    Tensor<double> x_hat = impute(model, MaskedTable<double>(scaled, mask), sched, opts,
                                  SamplerObserver<double>([&](const SamplerEvent<double>& e) {
                                      if (e.descend) ++evaluations;
                                  }));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t dense = static_cast<std::size_t>(opts.T_sampling) * static_cast<std::size_t>(opts.n_inferences);
    log("imputed " + std::to_string(mask.missing_count()) + " entries in " + fixed(secs, 2) + " s; " +
        std::to_string(evaluations) + " network evaluations (dense sampler: " + std::to_string(dense) +
        ", ratio " + fixed(static_cast<double>(evaluations) / static_cast<double>(dense), 3) + ")");

    if (ckpt.scaler) x_hat = ckpt.scaler->inverse_transform(x_hat);
    for (std::size_t i = 0; i < x_hat.size(); ++i)
        if (mask.known[i]) x_hat[i] = x_obs[i];

    const fs::path out = cfg.out.empty() ? fs::path("imputed.csv") : fs::path(cfg.out);
    {
        auto f = open_output(out);
        write_csv(f, x_hat, table.data.feature_names, provenance(cfg, "impute"), nullptr,
                  table.data.has_target() ? &table.data.target : nullptr, table.data.target_name);
    }
    {
        auto f = open_output(fs::path(out).concat(".mask.csv"));
        write_mask_csv(f, mask, table.data.feature_names);
    }
    write_config(fs::path(out).concat(".config.ini"), cfg, "impute");
    log("wrote " + out.string());
    return ok;
}

struct MethodSpec {
    std::string name;
    std::optional<BaselineKind> baseline;
    std::string checkpoint;
};

std::vector<MethodSpec> parse_methods(const RunConfig& cfg) {
    std::vector<MethodSpec> out;
    std::stringstream in(cfg.methods);
    std::string item;
    std::set<std::string> seen;
    while (std::getline(in, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        MethodSpec m;
        if (auto eq = item.find('='); eq != std::string::npos) {
            m.name = item.substr(0, eq);
            m.checkpoint = item.substr(eq + 1);
        } else if (item == "diffimpute") {
            if (cfg.checkpoint.empty())
                throw InputError("method 'diffimpute' needs --checkpoint (or use name=path in --methods)");
            m.name = item;
            m.checkpoint = cfg.checkpoint;
        } else {
            m.name = item;
            m.baseline = parse_baseline(item);
        }
        if (!seen.insert(m.name).second) throw InputError("method '" + m.name + "' listed twice");
        out.push_back(std::move(m));
    }
    if (out.empty()) throw InputError("no methods given");
    return out;
}

struct MethodResult {
    std::vector<EvalRow> rows;
    std::set<std::string> failed; // settings the method could not handle
    std::vector<std::pair<std::string, DownstreamResult>> downstream;
};

int cmd_benchmark(const RunConfig& cfg) {
    require(cfg.data, "--data");
    if (cfg.train_fraction >= 1.0) throw InputError("benchmark needs a test split (--train-fraction < 1)");
    const Dataset data = load_csv(cfg.data, csv_options(cfg, false));
    const auto [train_set, test_set] = partition(data, cfg);
    MinMaxScaler scaler;
    const Tensor<double> x_train = scaler.fit_transform(train_set.features);
    const Tensor<double> x_test = scaler.transform(test_set.features);
    const std::size_t k = x_test.dim(1);

    std::vector<MaskSpec> grid;
    for (const auto& s : parse_grid(cfg.grid)) {
        if (s.mechanism == Mechanism::mar && static_cast<std::size_t>(s.p_col) >= k) {
            log("skipping " + s.label() + ": needs more than " + std::to_string(s.p_col) + " columns");
            continue;
        }
        grid.push_back(s);
    }
    if (grid.empty()) throw InputError("no usable mask settings in the grid");

    const std::vector<MethodSpec> methods = parse_methods(cfg);
    std::vector<std::unique_ptr<Checkpoint<double>>> ckpts(methods.size());
    std::vector<std::unique_ptr<Denoiser<double>>> models(methods.size());
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (methods[i].baseline) continue;
        if (!fs::exists(methods[i].checkpoint))
            throw InputError("missing checkpoint '" + methods[i].checkpoint + "' for method '" + methods[i].name +
                             "'");
        ckpts[i] = std::make_unique<Checkpoint<double>>(load_checkpoint<double>(methods[i].checkpoint));
        if (ckpts[i]->config.k != k)
            throw ShapeError("checkpoint '" + methods[i].checkpoint + "' expects " +
                             std::to_string(ckpts[i]->config.k) + " features, data has " + std::to_string(k));
        models[i] = std::make_unique<Denoiser<double>>(ckpts[i]->model());
    }

    const auto run_method = [&](std::size_t i) {
        const MethodSpec& m = methods[i];
        MethodResult res;
        Imputer imputer;
        EvalOptions eval{cfg.sampler.n_mask_seeds, cfg.sampler.n_inferences, cfg.seed, {}, {}};
        if (cfg.original_scale) eval.report_scaler = scaler;
        if (m.baseline) {
            imputer = baseline_imputer(*m.baseline, x_train);
            eval.n_inferences = 1; // deterministic
        } else {
            SamplerOptions opts = cfg.sampler;
            opts.seed = cfg.seed;
            opts.T_training = ckpts[i]->T_training;
            imputer = diffusion_imputer(*models[i], ckpts[i]->schedule, opts);
        }
        for (const MaskSpec& spec : grid) {
            if (data.has_target())
                eval.on_average = [&](const MaskSpec& s, const Mask&, const Tensor<double>& avg) {
                    if (s.seed != cfg.seed) return;
                    res.downstream.emplace_back(spec.label(), downstream_eval(x_train, train_set.target, avg,
                                                                              test_set.target, data.task));
                };
            try {
                auto rows = ensemble_eval(m.name, imputer, x_test, {spec}, eval);
                res.rows.insert(res.rows.end(), rows.begin(), rows.end());
            } catch (const InputError& e) {
                res.failed.insert(spec.label());
                log(m.name + " / " + spec.label() + ": " + e.what());
            }
        }
        return res;
    };

    std::vector<MethodResult> results(methods.size());
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
    for (std::size_t start = 0; start < methods.size(); start += jobs) {
        std::vector<std::future<MethodResult>> pending;
        for (std::size_t i = start; i < std::min(methods.size(), start + jobs); ++i)
            pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_method, i));
        for (std::size_t i = 0; i < pending.size(); ++i) {
            results[start + i] = pending[i].get();
            log("finished " + methods[start + i].name);
        }
    }

    std::vector<EvalRow> all;
    for (const auto& r : results) all.insert(all.end(), r.rows.begin(), r.rows.end());
    const std::vector<SettingSummary> summary = summarize(all);

    const fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
    const auto comments = provenance(cfg, "benchmark");
    {
        auto f = open_output(dir / "eval.csv");
        write_comments(f, comments);
        write_eval_csv(f, all);
    }

    // methods x settings, "/" for cells a method cannot produce
    std::vector<std::string> header{"method"};
    for (const auto& s : grid) header.push_back(s.label());
    TextTable mse(header);
    std::map<std::pair<std::string, std::string>, double> cell;
    for (const auto& s : summary) cell[{s.method, s.setting}] = s.mse_mean;
    for (const auto& m : methods) {
        std::vector<std::string> row{m.name};
        for (const auto& s : grid) {
            auto it = cell.find({m.name, s.label()});
            row.push_back(it == cell.end() ? "/" : fixed(it->second));
        }
        mse.add_row(std::move(row));
    }
    write_table(dir / "mse_table", mse, comments);

    std::vector<RankInput> ranks;
    for (const auto& s : grid) {
        bool complete = true;
        for (const auto& m : methods) complete = complete && cell.count({m.name, s.label()});
        if (!complete) {
            log("rank table excludes " + s.label() + " (not every method produced it)");
            continue;
        }
        for (const auto& m : methods) ranks.push_back({s.label(), m.name, cell[{m.name, s.label()}]});
    }
    if (!ranks.empty()) write_table(dir / "rank_table", rank_report(rank_table(ranks)), comments);

    if (data.has_target()) {
        auto f = open_output(dir / "downstream.csv");
        write_comments(f, comments);
        f << "method,setting,metric,value\n";
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (const auto& [setting, d] : results[i].downstream)
                f << methods[i].name << ',' << setting << ',' << d.metric << ',' << format_real(d.value) << '\n';
    }
    write_config(dir / "config.ini", cfg, "benchmark");
    std::ostringstream shown;
    mse.print(shown);
    std::cerr << shown.str();
    log("wrote results to " + dir.string());
    return ok;
}

int cmd_ablate(const RunConfig& cfg) {
    require(cfg.checkpoint, "--checkpoint");
    require(cfg.data, "--data");
    const Checkpoint<double> ckpt = load_checkpoint<double>(cfg.checkpoint);
    const Dataset data = load_csv(cfg.data, csv_options(cfg, false));
    if (data.cols() != ckpt.config.k)
        throw ShapeError("data has " + std::to_string(data.cols()) + " feature columns, checkpoint expects " +
                         std::to_string(ckpt.config.k));
    const auto [train_set, test_set] = partition(data, cfg);
    MinMaxScaler scaler;
    if (ckpt.scaler) scaler = *ckpt.scaler;
    else scaler.fit(train_set.features);
    const Tensor<double> x_test = scaler.transform(test_set.features);

    if (cfg.mcar && cfg.mar) throw InputError("use at most one of --mcar, --mar");
    const MaskSpec mask = cfg.mar ? MaskSpec::mar(*cfg.mar) : MaskSpec::mcar(cfg.mcar.value_or(0.3));

    SamplerOptions base = cfg.sampler;
    base.seed = cfg.seed;
    base.T_training = ckpt.T_training;
    const auto settings = ablation_settings(cfg.presets, base, ckpt.config);
    const Denoiser<double> model = ckpt.model();
    EvalOptions eval{cfg.sampler.n_mask_seeds, cfg.sampler.n_inferences, cfg.seed, {}, {}};
    if (cfg.original_scale) eval.report_scaler = scaler;
    std::vector<AblationRow> rows;
    for (const auto& s : settings) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = run_ablation(model, ckpt.schedule, {s}, x_test, mask, eval);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log(s.label + ": mse " + fixed(r.front().mse_mean, 5) + " (" + fixed(secs, 1) + " s)");
        rows.push_back(std::move(r.front()));
    }

    const fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
    const auto comments = provenance(cfg, "ablate");
    {
        auto f = open_output(dir / "ablation_seeds.csv");
        write_comments(f, comments);
        f << "setting,arch,mask,mask_seed,mse\n";
        for (const auto& r : rows)
            for (const auto& s : r.seeds)
                f << r.setting << ',' << r.arch << ',' << mask.label() << ',' << s.mask_seed << ','
                  << format_real(s.mse) << '\n';
    }
    const TextTable table = ablation_table(rows);
    write_table(dir / "ablation", table, comments);
    write_config(dir / "config.ini", cfg, "ablate");
    std::ostringstream shown;
    table.print(shown);
    std::cerr << shown.str();
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-based imputation for tabular data"};
    app.set_version_flag("--version", std::string("diffimpute ") + version);
    app.require_subcommand(1);

    const std::vector<std::string> model_keys{
        "model.arch",          "model.blocks",      "model.hidden",           "model.resnet_factor",
        "model.d",             "model.heads",       "model.ffn_factor",       "model.attention_dropout",
        "model.ffn_dropout",   "model.residual_dropout", "model.unet_channels", "model.unet_groups",
        "model.time_embedding"};
    const std::vector<std::string> sampler_keys{"sampler.T_sampling",  "sampler.tau",          "sampler.skip_type",
                                                "sampler.eta",         "sampler.jump_length",  "sampler.jump_n_sample",
                                                "sampler.n_inferences", "sampler.stepper"};
    const auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    Bindings train_b, impute_b, bench_b, ablate_b;
    auto* train_cmd = app.add_subcommand("train", "Train a denoiser on a complete CSV and write a checkpoint");
    train_b.bind(train_cmd, join({"run.seed", "data.path", "data.target", "data.task", "data.train_fraction",
                                  "training.epochs", "training.batch_size", "training.T", "training.schedule",
                                  "training.lr", "training.weight_decay", "io.out"},
                                 model_keys));
    auto* impute_cmd = app.add_subcommand("impute", "Fill missing entries of a CSV with a trained checkpoint");
    impute_b.bind(impute_cmd, join({"run.seed", "data.path", "data.target", "data.task", "io.checkpoint", "mask.file",
                                    "mask.mcar", "mask.mar", "io.out"},
                                   sampler_keys));
    auto* bench_cmd = app.add_subcommand("benchmark", "Compare imputation methods over a grid of masks");
    bench_b.bind(bench_cmd, join({"run.seed", "data.path", "data.target", "data.task", "data.train_fraction",
                                  "io.checkpoint", "benchmark.methods", "benchmark.grid", "benchmark.jobs",
                                  "benchmark.original_scale", "sampler.n_mask_seeds", "io.out_dir"},
                                 sampler_keys));
    auto* ablate_cmd = app.add_subcommand("ablate", "Run sampler ablation presets against one checkpoint");
    ablate_b.bind(ablate_cmd, join({"run.seed", "data.path", "data.target", "data.task", "data.train_fraction",
                                    "io.checkpoint", "benchmark.presets", "benchmark.original_scale", "mask.mcar",
                                    "mask.mar", "sampler.n_mask_seeds", "io.out_dir"},
                                   sampler_keys));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*train_cmd) return cmd_train(train_b.resolve());
        if (*impute_cmd) return cmd_impute(impute_b.resolve());
        if (*bench_cmd) return cmd_benchmark(bench_b.resolve());
        if (*ablate_cmd) return cmd_ablate(ablate_b.resolve());
        return input_error;
    } catch (const InputError& e) {
        log(std::string("error: ") + e.what());
        return input_error;
    } catch (const ShapeError& e) {
        log(std::string("error: ") + e.what());
        return input_error;
    } catch (const NumericError& e) {
        log(std::string("numeric failure: ") + e.what());
        return numeric_error;
    } catch (const InvariantError& e) {
        log(std::string("internal error: ") + e.what());
        return internal_error;
    } catch (const fs::filesystem_error& e) {
        log(std::string("error: ") + e.what());
        return input_error;
    } catch (const std::exception& e) {
        log(std::string("internal error: ") + e.what());
        return internal_error;
    }
}
