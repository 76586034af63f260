// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "diffimpute/diffimpute.hpp"
#include "unit/cli_runner.hpp"
#include "unit/denoiser_check.hpp"
#include "unit/gradient_cases.hpp"
#include "unit/metric_fixtures.hpp"
#include "unit/plan_oracle.hpp"
#include "unit/sampler_check.hpp"

using namespace diffimpute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

int failures = 0;

void report(int n, const std::string& title, const Outcome& o) {
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (const auto& c : gradcheck::op_cases()) {
        const double e = c.run();
        worst = std::max(worst, e);
        o.require(e <= 1e-4, c.name + " " + sci(e));
    }
    for (auto arch : {Architecture::mlp, Architecture::resnet, Architecture::transformer, Architecture::unet}) {
        const auto r = gradcheck::check_denoiser(gradcheck::tiny_config(arch));
        worst = std::max({worst, r.input_error, r.worst_param_error});
        o.require(r.input_error <= 1e-4, to_string(arch) + " input " + sci(r.input_error));
        o.require(r.worst_param_error <= 1e-4, to_string(arch) + " " + r.worst_param + " " + sci(r.worst_param_error));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60, "runtime " + fixed(secs, 1) + " s");
    if (o.pass) o.detail = "worst rel. err " + sci(worst) + ", " + fixed(secs, 1) + " s";
    return o;
}

Outcome sampler_oracles() {
    Outcome o;
    const double adj = std::max(samplercheck::adjacent_step_gap(500, 1), samplercheck::adjacent_step_gap(1000, 2));
    o.require(adj <= 1e-10, "adjacent step gap " + sci(adj));

    const auto model = samplercheck::small_model(3, 4);
    const auto table = samplercheck::random_table(10, 3, MaskSpec::mcar(0.5, 4), 5);
    const double traj = std::max(samplercheck::trajectory_gap(model, table, 100, 1),
                                 samplercheck::trajectory_gap(model, table, 60, 4));
    o.require(traj <= 1e-8, "trajectory gap " + sci(traj));

    const int bad = oracle::first_plan_mismatch(1000, 2024);
    o.require(bad < 0, "plan mismatch at trial " + std::to_string(bad));

    o.require(skip_seq(500, 10, SkipType::uniform) == std::vector<int>{0, 50, 100, 150, 200, 250, 300, 350, 400, 450},
              "uniform skip_seq");
    o.require(skip_seq(500, 10, SkipType::quad) == std::vector<int>{0, 4, 19, 44, 79, 123, 177, 241, 316, 400},
              "quad skip_seq");
    if (o.pass) o.detail = "step gap " + sci(adj) + ", trajectory gap " + sci(traj) + ", 1000 plans match";
    return o;
}

Outcome known_region() {
    Outcome o;
    const int bad = samplercheck::known_mismatches(100, 31);
    o.require(bad == 0, std::to_string(bad) + " of 100 cases altered known entries");
    if (o.pass) o.detail = "100 cases, MCAR 0.1..0.9 and MAR 1..4";
    return o;
}

Outcome schedule_invariants() {
    Outcome o;
    for (int T : {100, 500, 1000}) {
        const auto s = build_cosine_schedule(T);
        const std::string tag = "T=" + std::to_string(T) + ": ";
        double sigma_err = 0;
        bool beta_ok = true, decreasing = true;
        for (int t = 1; t <= T; ++t) {
            beta_ok = beta_ok && s.beta_at(t) > 0 && s.beta_at(t) < 1;
            decreasing = decreasing && s.alpha_bar_at(t) < s.alpha_bar_at(t - 1);
            const double closed = std::sqrt((1 - s.alpha_bar_at(t - 1)) / (1 - s.alpha_bar_at(t)) * s.beta_at(t));
            sigma_err = std::max(sigma_err, std::abs(s.posterior_sigma_at(t) - closed));
        }
        o.require(beta_ok, tag + "beta outside (0, 1)");
        o.require(decreasing, tag + "alpha_bar not strictly decreasing");
        o.require(s.alpha_bar_at(T) <= 1e-3, tag + "alpha_bar_T " + sci(s.alpha_bar_at(T)));
        o.require(sigma_err <= 1e-12, tag + "sigma error " + sci(sigma_err));
    }
    return o;
}

// ---------------------------------------------------------------------------
// synthetic benchmark

constexpr int n_seeds = 5;

/// Two standard normal features with correlation rho.
Tensor<double> correlated_pair(std::size_t n, double rho, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> x({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.normal(), b = rng.normal();
        x.at(i, 0) = a;
        x.at(i, 1) = rho * a + std::sqrt(1 - rho * rho) * b;
    }
    return x;
}

struct Split {
    Tensor<double> train, test;
};

Split synthetic_split(std::uint64_t seed) {
    Dataset d;
    d.features = correlated_pair(5000, 0.95, Rng::derive(seed, 100).next_u64());
    d.feature_names = {"x0", "x1"};
    auto [train_set, test_set] = split(d, 0.8, seed);
    MinMaxScaler scaler;
    Split s;
    s.train = scaler.fit_transform(train_set.features);
    s.test = scaler.transform(test_set.features);
    return s;
}

Denoiser<double> train_mlp(const Tensor<double>& x, std::uint64_t seed, bool time_embedding,
                           std::vector<double>* losses = nullptr) {
    DenoiserConfig cfg;
    cfg.k = x.dim(1);
    cfg.time_embedding = time_embedding;
    Denoiser<double> model(cfg, Rng::derive(seed, 0).next_u64());
    TrainingConfig tc; // 20 epochs, batch 64, T 1000, lr 1e-3
    tc.seed = Rng::derive(seed, 1).next_u64();
    auto r = train(model, x, tc);
    if (losses) *losses = r.epoch_loss;
    return model;
}

SamplerOptions sampler_base(std::uint64_t seed) {
    SamplerOptions o;
    o.T_sampling = 500;
    o.T_training = 1000;
    o.n_inferences = 5;
    o.seed = seed;
    return o;
}

EvalOptions eval_options(std::uint64_t seed, int inferences) {
    EvalOptions e;
    e.n_mask_seeds = 1;
    e.n_inferences = inferences;
    e.seed = 1000 + seed;
    return e;
}

struct SeedResult {
    double mean_mse = 0;
    double dense_mse = 0;
    std::map<std::string, double> sweep; // tau label -> MSE
    bool loss_trend = false;
    double train_secs = 0, sweep_secs = 0;
};

SeedResult run_seed(std::uint64_t seed) {
    SeedResult r;
    const Split data = synthetic_split(seed);
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> losses;
    const auto model = train_mlp(data.train, seed, true, &losses);
    r.train_secs = seconds_since(t0);
    const std::size_t q = std::max<std::size_t>(1, losses.size() / 4);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < q; ++i) {
        first += losses[i];
        last += losses[losses.size() - 1 - i];
    }
    r.loss_trend = last < first;

    const MaskSpec mask = MaskSpec::mcar(0.3);
    const auto mean_rows = ensemble_eval("mean", baseline_imputer(BaselineKind::mean, data.train), data.test, {mask},
                                         eval_options(seed, 1));
    r.mean_mse = mean_rows.front().mse;
    const Imputer dense = diffusion_imputer(model, ScheduleKind::cosine, sampler_base(seed));
    const auto dense_rows = ensemble_eval("diffimpute", dense, data.test, {mask}, eval_options(seed, 5));
    r.dense_mse = dense_rows.front().mse;

    // tau sweep with harmonization j = 5
    t0 = std::chrono::steady_clock::now();
    SamplerOptions base = sampler_base(seed);
    base.jump_n_sample = 5;
    const auto settings = ablation_settings("tau-sweep", base, model.config());
    for (const auto& row : run_ablation(model, ScheduleKind::cosine, settings, data.test, mask, eval_options(seed, 5)))
        r.sweep[row.setting] = row.mse_mean;
    r.sweep_secs = seconds_since(t0);
    return r;
}

void write_table(const fs::path& stem, const TextTable& t) {
    fs::create_directories(stem.parent_path());
    std::ofstream txt(fs::path(stem).concat(".txt")), csv(fs::path(stem).concat(".csv"));
    t.print(txt);
    t.print_csv(csv);
    t.print(std::cout);
}

/// Harmonization table (TST x H) at tau = 50 on seed 0, MLP column.
TextTable harmonization_table() {
    const Split data = synthetic_split(0);
    SamplerOptions base = sampler_base(0);
    base.tau = 50;
    TextTable t({"TST", "H", "MLP"});
    for (bool tst : {false, true}) {
        const auto model = train_mlp(data.train, 0, tst);
        const auto settings = ablation_settings("j=1,5", base, model.config());
        const auto rows =
            run_ablation(model, ScheduleKind::cosine, settings, data.test, MaskSpec::mcar(0.3), eval_options(0, 5));
        for (const auto& r : rows)
            t.add_row({tst ? "yes" : "no", r.setting == "j=1" ? "no" : "yes (" + r.setting + ")", fixed(r.mse_mean)});
    }
    return t;
}

void synthetic_benchmark(Outcome& c5, Outcome& c6) {
    std::vector<SeedResult> results;
    for (int s = 0; s < n_seeds; ++s) {
        results.push_back(run_seed(static_cast<std::uint64_t>(s)));
        const auto& r = results.back();
        std::cout << "  seed " << s << ": train " << fixed(r.train_secs, 1) << " s, sweep " << fixed(r.sweep_secs, 1)
                  << " s, mean " << fixed(r.mean_mse, 5) << ", dense " << fixed(r.dense_mse, 5)
                  << ", tau=10 " << fixed(r.sweep.at("tau=10"), 5) << ", tau=250 " << fixed(r.sweep.at("tau=250"), 5)
                  << std::endl;
    }
    const fs::path out = fs::path(DIFFIMPUTE_TEST_TMP);

    int wins = 0;
    bool trend = true;
    double max_train = 0;
    TextTable comparison({"seed", "mean", "diffimpute"});
    for (int s = 0; s < n_seeds; ++s) {
        const auto& r = results[static_cast<std::size_t>(s)];
        wins += r.dense_mse < r.mean_mse;
        trend = trend && r.loss_trend;
        max_train = std::max(max_train, r.train_secs);
        comparison.add_row({std::to_string(s), fixed(r.mean_mse, 5), fixed(r.dense_mse, 5)});
    }
    write_table(out / "mcar30_vs_mean", comparison);
    c5.require(wins >= 4, "beats mean imputation on " + std::to_string(wins) + "/5 seeds");
    c5.require(trend, "last-quartile training loss not below first quartile on every seed");
    c5.require(max_train <= 300, "training took " + fixed(max_train, 1) + " s");
    if (c5.pass)
        c5.detail = "beats mean imputation on " + std::to_string(wins) + "/5 seeds, training <= " +
                    fixed(max_train, 1) + " s";

    int monotone = 0;
    TextTable sweep({"tau", "MLP (j=5)"});
    for (int tau : tau_sweep_values()) {
        const std::string label = "tau=" + std::to_string(tau);
        double mean = 0;
        for (const auto& r : results) mean += r.sweep.at(label);
        sweep.add_row({std::to_string(tau), fixed(mean / n_seeds, 5)});
    }
    for (const auto& r : results) monotone += r.sweep.at("tau=250") < r.sweep.at("tau=10");
    write_table(out / "ddim_tau_sweep", sweep);
    const TextTable harm = harmonization_table();
    write_table(out / "harmonization", harm);
    c6.require(monotone == n_seeds, "MSE(tau=250) < MSE(tau=10) on " + std::to_string(monotone) + "/5 seeds");
    if (c6.pass) c6.detail = "MSE(tau=250) < MSE(tau=10) with j=5 on 5/5 seeds; tables in " + out.string();
}

Outcome metric_fixtures() {
    Outcome o;
    int n = 0;
    for (const auto& c : fixtures::metric_checks()) {
        ++n;
        o.require(c.ok, c.name);
    }
    if (o.pass) o.detail = std::to_string(n) + " fixtures";
    return o;
}

// ---------------------------------------------------------------------------
// determinism

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "stderr.txt")
            files[fs::relative(e.path(), dir).string()] = cli::slurp(e.path());
    return files;
}

Outcome determinism() {
    Outcome o;
    const fs::path dir = fs::path(DIFFIMPUTE_TEST_TMP) / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    cli::write_table(dir / "complete.csv", 400, 3, 11, true);
    const std::string data = (dir / "complete.csv").string(), ckpt = (dir / "out/model.ckpt").string();
    const std::vector<std::string> sampler{"--T-sampling", "40", "--n-inferences", "2"};
    const auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const std::vector<std::vector<std::string>> commands{
        {"train", "--data", data, "--target", "y", "--out", ckpt, "--seed", "3", "--epochs", "10", "--batch-size",
         "32", "--T", "100", "--hidden", "32"},
        with({"impute", "--data", data, "--target", "y", "--checkpoint", ckpt, "--mcar", "0.3", "--seed", "4",
              "--out", (dir / "out/imputed.csv").string()},
             sampler),
        with({"impute", "--data", data, "--target", "y", "--checkpoint", ckpt, "--mar", "1", "--tau", "10", "--seed",
              "4", "--out", (dir / "out/imputed_mar.csv").string()},
             sampler),
        with({"benchmark", "--data", data, "--target", "y", "--checkpoint", ckpt, "--methods",
              "mean,median,mode,const0,const1,locf,nocb,diffimpute", "--grid", "mcar=30 mar=1", "--n-mask-seeds", "2",
              "--out-dir", (dir / "out/bench").string()},
             sampler),
        {"ablate", "--data", data, "--target", "y", "--checkpoint", ckpt, "--presets", "tau-sweep j=1,3",
         "--T-sampling", "500", "--n-inferences", "1", "--n-mask-seeds", "2", "--out-dir",
         (dir / "out/ablate").string()},
    };
    const auto run_all = [&] {
        for (const auto& c : commands) {
            const auto r = cli::run(c, dir);
            o.require(r.code == 0, c.front() + " exited " + std::to_string(r.code) + ": " + r.err);
        }
        return snapshot(dir / "out");
    };
    const auto first = run_all();
    const auto second = run_all();
    o.require(first.size() == second.size(), "file sets differ");
    for (const auto& [name, content] : first) {
        auto it = second.find(name);
        o.require(it != second.end() && it->second == content, name + " differs between runs");
    }
    if (o.pass) o.detail = std::to_string(first.size()) + " output files byte-identical across reruns";
    return o;
}

} // namespace

int main() {
    try {
        report(1, "gradient suite", gradient_suite());
        report(2, "sampler oracles", sampler_oracles());
        report(3, "known-region exactness", known_region());
        report(4, "schedule invariants", schedule_invariants());
        Outcome c5, c6;
        synthetic_benchmark(c5, c6);
        report(5, "end-to-end synthetic benchmark", c5);
        report(6, "harmonization and tau sweeps", c6);
        report(7, "metric fixtures", metric_fixtures());
        report(8, "determinism", determinism());
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
